#include "iilm/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "iilm/container.hpp"
#include "iilm/errors.hpp"
#include "iilm/random.hpp"

namespace iilm {

void OptimizerConfig::validate() const {
  if (delay < 1) throw ValidationError("delay factor must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam decay rates must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
}

double scheduled_learning_rate(const OptimizerConfig& cfg, std::size_t step) {
  if (step == 0) step = 1;
  if (cfg.warmup == 0) return cfg.learning_rate;
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup);
  return cfg.learning_rate * std::min(s / w, std::sqrt(w / s));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kModelPrefix = "model.";

std::map<std::string, std::string> config_header(const ModelConfig& config) {
  std::map<std::string, std::string> h;
  for (const auto& [k, v] : config.to_kv()) h[kModelPrefix + k] = v;
  return h;
}

ModelConfig config_from_header(const std::map<std::string, std::string>& header) {
  std::map<std::string, std::string> kv;
  const std::string prefix = kModelPrefix;
  for (const auto& [k, v] : header)
    if (k.rfind(prefix, 0) == 0) kv[k.substr(prefix.size())] = v;
  return ModelConfig::from_kv(kv);
}

const std::string& header_value(const Container& c, const std::string& key) {
  auto it = c.header.find(key);
  if (it == c.header.end()) throw ValidationError("container lacks header key '" + key + "'");
  return it->second;
}

std::size_t header_size(const Container& c, const std::string& key) {
  try {
    return static_cast<std::size_t>(std::stoull(header_value(c, key)));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ValidationError*>(&e)) throw;
    throw ValidationError("header key '" + key + "' is not an integer");
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  check_params(ckpt.config, ckpt.params);
  Container c;
  c.header = config_header(ckpt.config);
  c.header["kind"] = "checkpoint";
  c.header["iteration"] = std::to_string(ckpt.iteration);
  c.header["adam.step"] = std::to_string(ckpt.optimizer.step);
  for (const auto& [name, t] : ckpt.params) c.tensors["param/" + name] = t;
  for (const auto& [name, t] : ckpt.optimizer.m) c.tensors["adam.m/" + name] = t;
  for (const auto& [name, t] : ckpt.optimizer.v) c.tensors["adam.v/" + name] = t;
  for (auto& [name, t] : c.tensors) t.clear_grad();
  save_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (header_value(c, "kind") != "checkpoint") {
    throw ValidationError("'" + path.string() + "' is not a checkpoint");
  }
  Checkpoint ckpt;
  ckpt.config = config_from_header(c.header);
  ckpt.iteration = header_size(c, "iteration");
  ckpt.optimizer.step = header_size(c, "adam.step");
  for (const auto& [name, t] : c.tensors) {
    const auto slash = name.find('/');
    if (slash == std::string::npos) throw ValidationError("unexpected tensor '" + name + "' in checkpoint");
    const std::string group = name.substr(0, slash);
    const std::string key = name.substr(slash + 1);
    if (group == "param") {
      ckpt.params.emplace(key, t);
    } else if (group == "adam.m") {
      ckpt.optimizer.m.emplace(key, t);
    } else if (group == "adam.v") {
      ckpt.optimizer.v.emplace(key, t);
    } else {
      throw ValidationError("unexpected tensor '" + name + "' in checkpoint");
    }
  }
  check_params(ckpt.config, ckpt.params);
  if (!ckpt.optimizer.m.empty()) check_params(ckpt.config, ckpt.optimizer.m);
  if (!ckpt.optimizer.v.empty()) check_params(ckpt.config, ckpt.optimizer.v);
  return ckpt;
}

void save_fisher(const std::filesystem::path& path, const ModelConfig& config,
                 const ModelParams& fisher) {
  check_params(config, fisher);
  Container c;
  c.header = config_header(config);
  c.header["kind"] = "fisher";
  for (const auto& [name, t] : fisher) {
    Tensor copy = t;
    copy.clear_grad();
    c.tensors.emplace(name, std::move(copy));
  }
  save_container(path, c);
}

ModelParams load_fisher(const std::filesystem::path& path, const ModelConfig& expected) {
  Container c = load_container(path);
  if (header_value(c, "kind") != "fisher") {
    throw ValidationError("'" + path.string() + "' is not a Fisher file");
  }
  const ModelConfig stored = config_from_header(c.header);
  if (const auto d = stored.diff(expected); !d.empty()) {
    std::string msg = "Fisher file config differs from the model:";
    for (const auto& f : d) msg += " " + f;
    throw ValidationError(msg);
  }
  check_params(expected, c.tensors);
  return std::move(c.tensors);
}

// ---------------------------------------------------------------------------
// EWC

void EWCState::validate() const {
  if (!(strength >= 0.0) || !std::isfinite(strength)) {
    throw ValidationError("EWC strength must be finite and non-negative");
  }
  if (anchor.size() != fisher.size()) {
    throw ValidationError("EWC anchor and Fisher name sets differ");
  }
  for (const auto& [name, f] : fisher) {
    auto it = anchor.find(name);
    if (it == anchor.end()) throw ValidationError("Fisher entry '" + name + "' has no anchor");
    if (it->second.shape() != f.shape()) {
      throw ValidationError("Fisher entry '" + name + "' shape " + shape_str(f.shape()) +
                            " differs from anchor " + shape_str(it->second.shape()));
    }
    for (double x : f.data()) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw ValidationError("Fisher entry '" + name + "' has a negative or non-finite value");
      }
    }
  }
}

void EWCState::check_compatible(const ModelParams& params) const {
  validate();
  if (params.size() != anchor.size()) {
    throw ValidationError("EWC state covers " + std::to_string(anchor.size()) +
                          " tensors but the model has " + std::to_string(params.size()));
  }
  for (const auto& [name, t] : params) {
    auto it = anchor.find(name);
    if (it == anchor.end()) throw ValidationError("parameter '" + name + "' has no EWC anchor");
    if (it->second.shape() != t.shape()) {
      throw ValidationError("parameter '" + name + "' shape " + shape_str(t.shape()) +
                            " differs from its EWC anchor " + shape_str(it->second.shape()));
    }
  }
}

double ewc_penalty_value(const ModelParams& params, const EWCState& ewc) {
  ewc.check_compatible(params);
  double total = 0.0;
  for (const auto& [name, t] : params) {
    const auto th = t.data();
    const auto a = ewc.anchor.at(name).data();
    const auto f = ewc.fisher.at(name).data();
    double s = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) s += f[i] * (th[i] - a[i]) * (th[i] - a[i]);
    total += s;
  }
  return ewc.strength * total;
}

Var ewc_penalty(Tape& tape, ModelParams& params, const EWCState& ewc) {
  ewc.check_compatible(params);
  std::vector<Var> terms;
  terms.reserve(params.size());
  for (auto& [name, t] : params) {
    const Var diff = tape.sub(tape.param(t), tape.constant_ref(ewc.anchor.at(name)));
    terms.push_back(tape.sum(tape.mul(tape.square(diff), tape.constant_ref(ewc.fisher.at(name)))));
  }
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return tape.scale(total, ewc.strength);
}

Var ewc_loss(Tape& tape, ModelParams& params, const ModelConfig& config,
             std::span<const TrainingWindow> batch, const EWCState& ewc) {
  if (batch.empty()) throw ValidationError("EWC loss needs a non-empty batch");
  Var nll;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Var logits = forward(tape, params, config, batch[i]);
    const Var s = tape.nll_sum(logits, batch[i].targets, batch[i].loss_mask);
    nll = i == 0 ? s : tape.add(nll, s);
    tokens += batch[i].loss_count();
  }
  const Var mean = tape.scale(nll, tokens ? 1.0 / static_cast<double>(tokens) : 0.0);
  return tape.add(mean, ewc_penalty(tape, params, ewc));
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// Endless stream over the corpus, reshuffled at each epoch.
class WindowStream {
 public:
  WindowStream(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    pos_ = n;
  }
  std::size_t next() {
    if (pos_ == order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_;
};

constexpr std::uint64_t kDropoutStream = 0x9e3779b97f4a7c15ULL;

void clear_grads(ModelParams& params) {
  for (auto& [name, t] : params) t.clear_grad();
}

void ensure_moments(Checkpoint& ck) {
  for (const auto& [name, t] : ck.params) {
    if (!ck.optimizer.m.count(name)) ck.optimizer.m.emplace(name, Tensor(t.shape()));
    if (!ck.optimizer.v.count(name)) ck.optimizer.v.emplace(name, Tensor(t.shape()));
  }
}

void adam_step(Checkpoint& ck, const OptimizerConfig& cfg, double lr) {
  auto& st = ck.optimizer;
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (auto& [name, t] : ck.params) {
    auto th = t.data();
    auto m = st.m.at(name).data();
    auto v = st.v.at(name).data();
    const auto g = std::as_const(t).grad();
    for (std::size_t i = 0; i < th.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      th[i] -= lr * mh / (std::sqrt(vh) + cfg.epsilon);
    }
  }
}

Checkpoint snapshot(const Checkpoint& ck) {
  Checkpoint s = ck;
  clear_grads(s.params);
  return s;
}

}  // namespace

TrainResult train(Checkpoint start, std::span<const TrainingWindow> corpus,
                  const OptimizerConfig& cfg, std::uint64_t seed, const EWCState* ewc) {
  cfg.validate();
  start.config.validate();
  check_params(start.config, start.params);
  if (corpus.empty()) throw ValidationError("training corpus is empty");
  if (ewc) ewc->check_compatible(start.params);
  for (const auto& w : corpus) {
    if (w.size() > start.config.max_len) {
      throw ValidationError("training window of " + std::to_string(w.size()) +
                            " tokens exceeds max_len " + std::to_string(start.config.max_len));
    }
  }

  TrainResult result;
  Checkpoint ck = std::move(start);
  ensure_moments(ck);
  clear_grads(ck.params);
  WindowStream stream(corpus.size(), seed);
  Rng dropout_rng(seed ^ kDropoutStream);
  ForwardOptions fopt;
  if (ck.config.dropout > 0.0) fopt.dropout_rng = &dropout_rng;

  const std::size_t updates = cfg.updates();
  for (std::size_t u = 0; u < updates; ++u) {
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t d = 0; d < cfg.delay; ++d) {
      ++ck.iteration;
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const TrainingWindow& w = corpus[stream.next()];
        Tape tape;
        const Var logits = forward(tape, ck.params, ck.config, w, fopt);
        const Var loss = tape.nll_sum(logits, w.targets, w.loss_mask);
        const double lv = tape.scalar(loss);
        if (!std::isfinite(lv)) {
          throw TrainingError("non-finite loss at iteration " + std::to_string(ck.iteration));
        }
        tape.backward(loss);
        nll += lv;
        tokens += w.loss_count();
      }
    }
    if (tokens > 0) {
      const double inv = 1.0 / static_cast<double>(tokens);
      for (auto& [name, t] : ck.params)
        if (t.has_grad())
          for (auto& g : t.grad()) g *= inv;
    }
    UpdateRecord rec;
    rec.update = u + 1;
    rec.iteration = ck.iteration;
    rec.tokens = tokens;
    rec.loss = tokens ? nll / static_cast<double>(tokens) : 0.0;
    if (ewc) {
      Tape tape;
      const Var pen = ewc_penalty(tape, ck.params, *ewc);
      rec.penalty = tape.scalar(pen);
      tape.backward(pen);
    }
    if (!std::isfinite(rec.loss + rec.penalty)) {
      throw TrainingError("non-finite loss at iteration " + std::to_string(ck.iteration));
    }
    rec.learning_rate = scheduled_learning_rate(cfg, ck.optimizer.step + 1);
    adam_step(ck, cfg, rec.learning_rate);
    clear_grads(ck.params);
    result.log.push_back(rec);
    if (cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0) {
      result.checkpoints.push_back(snapshot(ck));
    }
  }
  if (result.checkpoints.empty() || result.checkpoints.back().optimizer.step != ck.optimizer.step) {
    result.checkpoints.push_back(snapshot(ck));
  }
  result.final = std::move(ck);
  return result;
}

Checkpoint restart_from(const Checkpoint& ckpt) {
  Checkpoint c = snapshot(ckpt);
  c.optimizer = {};
  return c;
}

TrainResult finetune_ewc(const Checkpoint& start, std::span<const TrainingWindow> corpus_b,
                         const EWCState& ewc, const OptimizerConfig& cfg, std::uint64_t seed) {
  if (cfg.iterations < cfg.delay) throw ValidationError("fine-tuning needs at least one update");
  TrainResult r = train(restart_from(start), corpus_b, cfg, seed, &ewc);
  r.checkpoints.insert(r.checkpoints.begin(), snapshot(start));
  return r;
}

// ---------------------------------------------------------------------------
// Fisher

ModelParams estimate_fisher(const ModelParams& params, const ModelConfig& config,
                            std::span<const std::vector<TrainingWindow>> batches) {
  if (batches.empty()) throw ValidationError("Fisher estimation needs at least one batch");
  ModelParams work = params;
  clear_grads(work);
  ModelParams fisher;
  for (const auto& [name, t] : work) fisher.emplace(name, Tensor(t.shape()));
  for (const auto& batch : batches) {
    if (batch.empty()) throw ValidationError("Fisher estimation batch is empty");
    std::size_t tokens = 0;
    for (const auto& w : batch) {
      Tape tape;
      const Var logits = forward(tape, work, config, w);
      tape.backward(tape.nll_sum(logits, w.targets, w.loss_mask));
      tokens += w.loss_count();
    }
    const double inv = tokens ? 1.0 / static_cast<double>(tokens) : 0.0;
    for (auto& [name, t] : work) {
      if (!t.has_grad()) continue;
      auto f = fisher.at(name).data();
      const auto g = std::as_const(t).grad();
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double gi = g[i] * inv;
        f[i] += gi * gi;
      }
    }
    clear_grads(work);
  }
  const double n = static_cast<double>(batches.size());
  for (auto& [name, t] : fisher)
    for (auto& x : t.data()) x /= n;
  return fisher;
}

ModelParams estimate_fisher(const ModelParams& params, const ModelConfig& config,
                            std::span<const TrainingWindow> corpus, std::size_t n_samples,
                            std::size_t batch_size, std::uint64_t seed) {
  if (corpus.empty()) throw ValidationError("Fisher estimation corpus is empty");
  if (n_samples < 1) throw ValidationError("Fisher estimation needs n_samples >= 1");
  if (batch_size < 1) throw ValidationError("Fisher estimation needs batch_size >= 1");
  Rng rng(seed);
  std::vector<std::vector<TrainingWindow>> batches(n_samples);
  for (auto& b : batches)
    for (std::size_t i = 0; i < batch_size; ++i) b.push_back(corpus[rng.index(corpus.size())]);
  return estimate_fisher(params, config, batches);
}

// ---------------------------------------------------------------------------
// Averaging

ModelParams average_params(std::span<const ModelParams> params) {
  if (params.empty()) throw ValidationError("nothing to average");
  for (std::size_t i = 1; i < params.size(); ++i) {
    if (params[i].size() != params[0].size()) throw ValidationError("parameter name sets differ");
    for (const auto& [name, t] : params[0]) {
      auto it = params[i].find(name);
      if (it == params[i].end()) {
        throw ValidationError("parameter '" + name + "' missing from input " + std::to_string(i));
      }
      if (it->second.shape() != t.shape()) throw ValidationError("parameter '" + name + "' shapes differ");
    }
  }
  const std::size_t k = params.size();
  ModelParams out;
  std::vector<double> vals(k);
  for (const auto& [name, t0] : params[0]) {
    Tensor avg(t0.shape());
    auto dst = avg.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) vals[j] = params[j].at(name)[i];
      // Sorting fixes the summation order; offsets from the minimum make the
      // mean of identical values exact.
      std::sort(vals.begin(), vals.end());
      double s = 0.0;
      for (std::size_t j = 1; j < k; ++j) s += vals[j] - vals[0];
      dst[i] = vals[0] + s / static_cast<double>(k);
    }
    out.emplace(name, std::move(avg));
  }
  return out;
}

ModelParams average_checkpoints(std::span<const Checkpoint> checkpoints) {
  if (checkpoints.empty()) throw ValidationError("nothing to average");
  std::vector<ModelParams> ps;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto d = checkpoints[i].config.diff(checkpoints[0].config);
    if (!d.empty()) {
      std::string msg = "checkpoint " + std::to_string(i) + " config differs:";
      for (const auto& f : d) msg += " " + f;
      throw ValidationError(msg);
    }
    check_params(checkpoints[i].config, checkpoints[i].params);
    ps.push_back(checkpoints[i].params);
  }
  return average_params(ps);
}

}  // namespace iilm
