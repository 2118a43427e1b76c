#include "iilm/model.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "iilm/errors.hpp"
#include "iilm/masks.hpp"

namespace iilm {

std::string to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::SentenceLevel: return "sentence";
    case ModelMode::DocStandard: return "doc-standard";
    case ModelMode::IntraInter: return "intra-inter";
  }
  return "?";
}

ModelMode parse_model_mode(std::string_view name) {
  if (name == "sentence") return ModelMode::SentenceLevel;
  if (name == "doc-standard") return ModelMode::DocStandard;
  if (name == "intra-inter") return ModelMode::IntraInter;
  throw ValidationError("unknown model mode '" + std::string(name) +
                        "' (expected sentence, doc-standard or intra-inter)");
}

void ModelConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || n_layers < 1 || d_ff < 1 || vocab_size < 1 || max_len < 1) {
    throw ValidationError("model dimensions must all be at least 1");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
  }
  if (d_model < 2) throw ValidationError("d_model must be at least 2 for layer normalization");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0,1)");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::ostringstream dr;
  dr.precision(17);
  dr << dropout;
  return {{"mode", to_string(mode)},
          {"d_model", std::to_string(d_model)},
          {"n_heads", std::to_string(n_heads)},
          {"n_layers", std::to_string(n_layers)},
          {"d_ff", std::to_string(d_ff)},
          {"vocab_size", std::to_string(vocab_size)},
          {"max_len", std::to_string(max_len)},
          {"dropout", dr.str()}};
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError("model config lacks key '" + k + "'");
    return it->second;
  };
  auto size = [&](const std::string& k) {
    try {
      return static_cast<std::size_t>(std::stoull(get(k)));
    } catch (const std::logic_error&) {
      throw ValidationError("model config key '" + k + "' is not an integer");
    }
  };
  ModelConfig c;
  c.mode = parse_model_mode(get("mode"));
  c.d_model = size("d_model");
  c.n_heads = size("n_heads");
  c.n_layers = size("n_layers");
  c.d_ff = size("d_ff");
  c.vocab_size = size("vocab_size");
  c.max_len = size("max_len");
  try {
    c.dropout = std::stod(get("dropout"));
  } catch (const std::logic_error&) {
    throw ValidationError("model config key 'dropout' is not a number");
  }
  c.validate();
  return c;
}

std::vector<std::string> ModelConfig::diff(const ModelConfig& other) const {
  std::vector<std::string> out;
  const auto a = to_kv();
  const auto b = other.to_kv();
  for (const auto& [k, v] : a)
    if (b.at(k) != v) out.push_back(k + " (" + v + " vs " + b.at(k) + ")");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> attention_blocks(ModelMode mode) {
  if (mode == ModelMode::IntraInter) return {"intra", "inter"};
  return {"attn"};
}

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

}  // namespace

std::map<std::string, Shape> parameter_shapes(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model, f = config.d_ff, v = config.vocab_size;
  std::map<std::string, Shape> s;
  s["embed"] = {v, d};
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    for (const auto& b : attention_blocks(config.mode)) {
      for (const char* w : {"wq", "wk", "wv", "wo"}) s[p + b + "." + w] = {d, d};
      for (const char* w : {"bq", "bk", "bv", "bo"}) s[p + b + "." + w] = {d};
      s[p + "ln_" + b + ".gain"] = {d};
      s[p + "ln_" + b + ".bias"] = {d};
    }
    s[p + "ln_ff.gain"] = {d};
    s[p + "ln_ff.bias"] = {d};
    s[p + "ff.w1"] = {d, f};
    s[p + "ff.b1"] = {f};
    s[p + "ff.w2"] = {f, d};
    s[p + "ff.b2"] = {d};
  }
  s["ln_final.gain"] = {d};
  s["ln_final.bias"] = {d};
  s["out.w"] = {d, v};
  s["out.b"] = {v};
  return s;
}

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    std::size_t k = 1;
    for (auto x : shape) k *= x;
    n += k;
  }
  return n;
}

std::size_t matched_ff_width(const ModelConfig& reference, ModelMode mode) {
  ModelConfig c = reference;
  c.mode = mode;
  const auto target = static_cast<double>(parameter_count(reference));
  c.d_ff = 1;
  const auto base = static_cast<double>(parameter_count(c));
  // Each feed-forward unit adds a column of w1, an entry of b1 and a row of w2.
  const double per_unit = static_cast<double>(2 * c.d_model + 1) * static_cast<double>(c.n_layers);
  const double units = std::round((target - base) / per_unit) + 1.0;
  return units < 1.0 ? 1 : static_cast<std::size_t>(units);
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams params;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape);
    const bool is_gain = name.ends_with(".gain");
    if (is_gain) {
      for (auto& x : t.data()) x = 1.0;
    } else if (shape.size() == 2) {
      // embed rows are scaled by sqrt(d_model) in forward, so both cases use 1/sqrt(rows or d).
      const double fan = name == "embed" ? static_cast<double>(config.d_model)
                                         : static_cast<double>(shape[0]);
      const double sd = 1.0 / std::sqrt(fan);
      for (auto& x : t.data()) x = sd * rng.normal();
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

void check_params(const ModelConfig& config, const ModelParams& params) {
  const auto shapes = parameter_shapes(config);
  std::vector<std::string> missing, extra, wrong;
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) {
      missing.push_back(name);
    } else if (it->second.shape() != shape) {
      wrong.push_back(name + " " + shape_str(it->second.shape()) + " (expected " + shape_str(shape) + ")");
    }
  }
  for (const auto& [name, t] : params)
    if (!shapes.count(name)) extra.push_back(name);
  if (missing.empty() && extra.empty() && wrong.empty()) return;
  std::string msg = "parameters do not match the model config:";
  auto list = [&](const char* what, const std::vector<std::string>& v) {
    if (v.empty()) return;
    msg += std::string(" ") + what + " {";
    for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? ", " : "") + v[i];
    msg += "}";
  };
  list("missing", missing);
  list("unexpected", extra);
  list("wrong shape", wrong);
  throw ValidationError(msg);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> window_positions(const TrainingWindow& window, ModelMode mode) {
  std::vector<std::size_t> pos(window.size());
  if (mode == ModelMode::SentenceLevel) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (i > 0 && window.sentence_index[i] != window.sentence_index[i - 1]) start = i;
      pos[i] = i - start;
    }
  } else {
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = window.position_offset + i;
  }
  return pos;
}

Tensor positional_encoding(std::span<const std::size_t> positions, std::size_t d_model) {
  Tensor pe({positions.size(), d_model});
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const auto p = static_cast<double>(positions[r]);
    for (std::size_t j = 0; j < d_model; ++j) {
      const double i2 = static_cast<double>(j - j % 2);
      const double angle = p / std::pow(10000.0, i2 / static_cast<double>(d_model));
      pe.at(r, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor positional_encoding(const TrainingWindow& window, const ModelConfig& config) {
  return positional_encoding(window_positions(window, config.mode), config.d_model);
}

namespace {

using Binder = std::function<Var(const std::string&)>;

Var dropout(Tape& tape, Var x, double rate, Rng* rng) {
  if (!rng || rate <= 0.0) return x;
  Tensor keep(tape.value(x).shape());
  const double s = 1.0 / (1.0 - rate);
  for (auto& k : keep.data()) k = rng->uniform() < rate ? 0.0 : s;
  return tape.mul(x, tape.constant(std::move(keep)));
}

Var norm(Tape& tape, const Binder& P, Var x, const std::string& name) {
  return tape.layer_norm(x, P(name + ".gain"), P(name + ".bias"));
}

Var attention(Tape& tape, const Binder& P, const ModelConfig& c, Var h, const BoolMatrix& mask,
              const std::string& name) {
  const Var q = tape.add_row(tape.matmul(h, P(name + ".wq")), P(name + ".bq"));
  const Var k = tape.add_row(tape.matmul(h, P(name + ".wk")), P(name + ".bk"));
  const Var v = tape.add_row(tape.matmul(h, P(name + ".wv")), P(name + ".bv"));
  const std::size_t dh = c.d_model / c.n_heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(c.n_heads);
  for (std::size_t i = 0; i < c.n_heads; ++i) {
    const Var qh = c.n_heads == 1 ? q : tape.slice_cols(q, i * dh, (i + 1) * dh);
    const Var kh = c.n_heads == 1 ? k : tape.slice_cols(k, i * dh, (i + 1) * dh);
    const Var vh = c.n_heads == 1 ? v : tape.slice_cols(v, i * dh, (i + 1) * dh);
    const Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv);
    heads.push_back(tape.matmul(tape.masked_softmax(scores, mask), vh));
  }
  const Var o = c.n_heads == 1 ? heads[0] : tape.concat_cols(heads);
  return tape.add_row(tape.matmul(o, P(name + ".wo")), P(name + ".bo"));
}

Var feed_forward(Tape& tape, const Binder& P, Var h, const std::string& p) {
  const Var a = tape.relu(tape.add_row(tape.matmul(h, P(p + "ff.w1")), P(p + "ff.b1")));
  return tape.add_row(tape.matmul(a, P(p + "ff.w2")), P(p + "ff.b2"));
}

Var forward_impl(Tape& tape, const Binder& P, const ModelConfig& c, const TrainingWindow& w,
                 Rng* rng) {
  if (w.size() == 0) throw ValidationError("cannot run the model on an empty window");
  if (w.size() > c.max_len) {
    throw ValidationError("window of " + std::to_string(w.size()) + " tokens exceeds max_len " +
                          std::to_string(c.max_len));
  }
  if (w.inputs.size() != w.size() || w.sentence_index.size() != w.size()) {
    throw ValidationError("inconsistent training window fields");
  }
  const double rate = c.dropout;

  Var x = tape.scale(tape.embedding(P("embed"), w.inputs), std::sqrt(static_cast<double>(c.d_model)));
  x = tape.add(x, tape.constant(positional_encoding(w, c)));
  x = dropout(tape, x, rate, rng);

  AttentionMaskPair masks = build_masks(w.sentence_index);
  BoolMatrix causal;
  if (c.mode == ModelMode::DocStandard) causal = build_causal_mask(w.size());
  std::vector<double> gate(w.size());
  bool any_inter = false;
  for (std::size_t q = 0; q < w.size(); ++q) {
    gate[q] = masks.inter.row_any(q) ? 1.0 : 0.0;
    any_inter = any_inter || gate[q] != 0.0;
  }

  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    if (c.mode == ModelMode::IntraInter) {
      Var a = attention(tape, P, c, norm(tape, P, x, p + "ln_intra"), masks.intra, p + "intra");
      x = tape.add(x, dropout(tape, a, rate, rng));
      // Queries without any earlier sentence get no inter-sentential contribution.
      if (any_inter) {
        a = attention(tape, P, c, norm(tape, P, x, p + "ln_inter"), masks.inter, p + "inter");
        a = tape.scale_rows(a, gate);
        x = tape.add(x, dropout(tape, a, rate, rng));
      }
    } else {
      const BoolMatrix& mask = c.mode == ModelMode::DocStandard ? causal : masks.intra;
      Var a = attention(tape, P, c, norm(tape, P, x, p + "ln_attn"), mask, p + "attn");
      x = tape.add(x, dropout(tape, a, rate, rng));
    }
    Var f = feed_forward(tape, P, norm(tape, P, x, p + "ln_ff"), p);
    x = tape.add(x, dropout(tape, f, rate, rng));
  }
  x = norm(tape, P, x, "ln_final");
  return tape.add_row(tape.matmul(x, P("out.w")), P("out.b"));
}

const Tensor& lookup(const ModelParams& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ValidationError("missing parameter '" + name + "'");
  return it->second;
}

}  // namespace

Var forward(Tape& tape, ModelParams& params, const ModelConfig& config,
            const TrainingWindow& window, const ForwardOptions& options) {
  Binder bind = [&](const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw ValidationError("missing parameter '" + name + "'");
    return tape.param(it->second);
  };
  return forward_impl(tape, bind, config, window, options.dropout_rng);
}

Var forward(Tape& tape, const ModelParams& params, const ModelConfig& config,
            const TrainingWindow& window) {
  Binder bind = [&](const std::string& name) { return tape.constant_ref(lookup(params, name)); };
  return forward_impl(tape, bind, config, window, nullptr);
}

Tensor compute_logits(const ModelParams& params, const ModelConfig& config,
                      const TrainingWindow& window) {
  Tape tape;
  return tape.value(forward(tape, params, config, window));
}

WindowOptions window_options(const ModelConfig& config, std::size_t context_len) {
  WindowOptions o;
  o.mode = config.mode == ModelMode::SentenceLevel ? WindowMode::Sentence : WindowMode::Document;
  o.max_len = config.max_len;
  o.context_len = context_len;
  return o;
}

std::vector<double> log_prob(const ModelParams& params, const ModelConfig& config,
                             const Document& doc, std::size_t context_len) {
  std::vector<double> out;
  out.reserve(doc.token_count());
  for (const auto& w : make_windows(doc, window_options(config, context_len))) {
    const Tensor lp = log_softmax_rows(compute_logits(params, config, w));
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w.loss_mask[i]) continue;
      out.push_back(lp.at(i, static_cast<std::size_t>(w.targets[i])));
    }
  }
  return out;
}

double CorpusScore::perplexity() const {
  return std::exp(-total_log_prob / static_cast<double>(tokens));
}

double CorpusScore::doc_perplexity(std::size_t i) const {
  return std::exp(-doc_log_prob.at(i) / static_cast<double>(doc_tokens.at(i)));
}

CorpusScore score_corpus(const ModelParams& params, const ModelConfig& config,
                         std::span<const Document> corpus, std::size_t context_len) {
  if (corpus.empty()) throw ValidationError("cannot score an empty corpus");
  CorpusScore s;
  for (const auto& doc : corpus) {
    double total = 0.0;
    const auto lp = log_prob(params, config, doc, context_len);
    for (double x : lp) total += x;
    s.doc_log_prob.push_back(total);
    s.doc_tokens.push_back(lp.size());
    s.total_log_prob += total;
    s.tokens += lp.size();
  }
  if (s.tokens == 0) throw ValidationError("corpus contains no tokens");
  return s;
}

double perplexity(const ModelParams& params, const ModelConfig& config,
                  std::span<const Document> corpus, std::size_t context_len) {
  return score_corpus(params, config, corpus, context_len).perplexity();
}

}  // namespace iilm
