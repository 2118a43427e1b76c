// Command-line front end: corpus generation, training, evaluation, EWC
// fine-tuning, checkpoint averaging, n-best reranking and corpus filtering.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iilm/container.hpp"
#include "iilm/corpus.hpp"
#include "iilm/errors.hpp"
#include "iilm/filter.hpp"
#include "iilm/io.hpp"
#include "iilm/model.hpp"
#include "iilm/rerank.hpp"
#include "iilm/synthetic.hpp"
#include "iilm/text.hpp"
#include "iilm/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace iilm;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<Document> encode_all(const Vocabulary& vocab, const std::vector<TextDocument>& docs) {
  std::vector<Document> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(vocab.encode(d));
  return out;
}

void require_vocab_matches(const Vocabulary& vocab, const ModelConfig& config) {
  if (vocab.size() != config.vocab_size) {
    throw ValidationError("vocabulary has " + std::to_string(vocab.size()) +
                          " entries but the checkpoint expects " + std::to_string(config.vocab_size));
  }
}

std::string checkpoint_name(std::size_t update) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint-%06zu.ckpt", update);
  return buf;
}

std::string loss_csv(const std::vector<UpdateRecord>& log) {
  std::ostringstream os;
  os << "update,iteration,loss,penalty,learning_rate,tokens\n";
  for (const auto& r : log) {
    os << r.update << ',' << r.iteration << ',' << fmt(r.loss) << ',' << fmt(r.penalty) << ','
       << fmt(r.learning_rate) << ',' << r.tokens << '\n';
  }
  return os.str();
}

// Writes every snapshot, the final state and the loss log under dir.
void write_run(const fs::path& dir, const TrainResult& r) {
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
    save_checkpoint(dir / checkpoint_name(r.checkpoints[i].optimizer.step), r.checkpoints[i]);
  }
  save_checkpoint(dir / "final.ckpt", r.final);
  write_file_atomic(dir / "loss.csv", loss_csv(r.log));
}

// ---------------------------------------------------------------------------
// Shared option groups

struct ModelFlags {
  std::string mode = "intra-inter";
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 256;
  std::size_t max_len = 256;
  double dropout = 0.1;
  bool match_params = false;

  void add(CLI::App* app) {
    app->add_option("--mode", mode, "Model variant")
        ->check(CLI::IsMember({"sentence", "doc-standard", "intra-inter"}));
    app->add_option("--d-model", d_model, "Model width");
    app->add_option("--heads", heads, "Attention heads");
    app->add_option("--layers", layers, "Decoder layers");
    app->add_option("--d-ff", d_ff, "Feed-forward width");
    app->add_option("--max-len", max_len, "Maximum window length in tokens");
    app->add_option("--dropout", dropout, "Dropout rate");
    app->add_flag("--match-params", match_params,
                  "Resize --d-ff of sentence/doc-standard models to the parameter count of the "
                  "intra-inter model with the same flags");
  }

  ModelConfig config(std::size_t vocab_size) const {
    ModelConfig c;
    c.mode = parse_model_mode(mode);
    c.d_model = d_model;
    c.n_heads = heads;
    c.n_layers = layers;
    c.d_ff = d_ff;
    c.vocab_size = vocab_size;
    c.max_len = max_len;
    c.dropout = dropout;
    c.validate();
    if (match_params && c.mode != ModelMode::IntraInter) {
      ModelConfig ref = c;
      ref.mode = ModelMode::IntraInter;
      c.d_ff = matched_ff_width(ref, c.mode);
    }
    return c;
  }
};

struct OptimizerFlags {
  OptimizerConfig cfg;

  void add(CLI::App* app, std::size_t default_steps, std::size_t default_warmup) {
    cfg.iterations = default_steps;
    cfg.warmup = default_warmup;
    app->add_option("--steps", cfg.iterations, "Micro-batch iterations");
    app->add_option("--delay", cfg.delay, "Micro-batches accumulated per update");
    app->add_option("--batch-size", cfg.batch_size, "Windows per micro-batch");
    app->add_option("--lr", cfg.learning_rate, "Peak learning rate");
    app->add_option("--warmup", cfg.warmup, "Warmup updates (0 = constant rate)");
    app->add_option("--beta1", cfg.beta1, "Adam first-moment decay");
    app->add_option("--beta2", cfg.beta2, "Adam second-moment decay");
    app->add_option("--adam-eps", cfg.epsilon, "Adam epsilon");
    app->add_option("--checkpoint-every", cfg.checkpoint_every,
                    "Snapshot interval in updates (0 = final only)");
  }
};

// ---------------------------------------------------------------------------
// Subcommands

struct GenCorpus {
  TopicCorpusOptions opts;
  fs::path out;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--out", out, "Output corpus file")->required();
    app->add_option("--documents", opts.documents, "Number of documents");
    app->add_option("--topics", opts.topics, "Number of topics");
    app->add_option("--words-per-topic", opts.words_per_topic, "Topic vocabulary size");
    app->add_option("--function-words", opts.function_words, "Shared vocabulary size");
    app->add_option("--first-topic", opts.first_topic, "First topic documents may use");
    app->add_option("--topic-span", opts.topic_span, "Number of usable topics (0 = all)");
    app->add_option("--min-sentences", opts.min_sentences, "Fewest sentences per document");
    app->add_option("--max-sentences", opts.max_sentences, "Most sentences per document");
    app->add_option("--min-words", opts.min_words, "Fewest words per sentence");
    app->add_option("--max-words", opts.max_words, "Most words per sentence");
    app->add_option("--topic-word-rate", opts.topic_word_rate, "Share of topic words mid-sentence");
    app->add_option("--seed", seed, "Random seed");
  }

  void run() const {
    write_file_atomic(out, format_documents(topic_corpus(opts, seed)));
    std::cerr << "wrote " << opts.documents << " documents to " << out.string() << "\n";
  }
};

struct Train {
  ModelFlags model;
  OptimizerFlags opt;
  fs::path corpus;
  fs::path out;
  std::optional<fs::path> vocab_path;
  std::optional<fs::path> init;
  std::size_t min_count = 1;
  std::size_t context_len = 128;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    model.add(app);
    opt.add(app, 1000, 400);
    app->add_option("--corpus", corpus, "Training corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--vocab", vocab_path, "Existing vocabulary (built from the corpus otherwise)")
        ->check(CLI::ExistingFile);
    app->add_option("--init", init, "Continue from this checkpoint instead of a fresh model")
        ->check(CLI::ExistingFile);
    app->add_option("--min-count", min_count, "Minimum token count for a new vocabulary");
    app->add_option("--context-len", context_len, "Context tokens re-included in continuation windows");
    app->add_option("--seed", seed, "Random seed");
  }

  void run() const {
    const auto text = load_documents(corpus);
    const Vocabulary vocab = vocab_path ? Vocabulary::load(*vocab_path) : build_vocab(text, min_count);
    Checkpoint start;
    if (init) {
      start = load_checkpoint(*init);
      require_vocab_matches(vocab, start.config);
    } else {
      start.config = model.config(vocab.size());
      start.params = init_params(start.config, seed);
    }
    std::cerr << "model: " << to_string(start.config.mode) << ", " << parameter_count(start.config)
              << " parameters, d_ff " << start.config.d_ff << "\n";
    const auto docs = encode_all(vocab, text);
    const auto windows = make_windows(docs, window_options(start.config, context_len));
    const TrainResult r = train(std::move(start), windows, opt.cfg, seed);
    vocab.save(out / "vocab.txt");
    write_run(out, r);
    if (!r.log.empty()) std::cerr << "final loss " << fmt(r.log.back().loss) << "\n";
  }
};

struct EvalPpl {
  fs::path ckpt;
  fs::path vocab_path;
  fs::path corpus;
  std::size_t context_len = 128;
  bool json = false;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab_path, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Evaluation corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--context-len", context_len, "Context tokens re-included in continuation windows");
    app->add_flag("--json", json, "Print JSON instead of tab-separated text");
    app->add_option("--seed", seed, "Random seed (evaluation is deterministic)");
  }

  void run() const {
    const Checkpoint ck = load_checkpoint(ckpt);
    const Vocabulary vocab = Vocabulary::load(vocab_path);
    require_vocab_matches(vocab, ck.config);
    const auto docs = encode_all(vocab, load_documents(corpus));
    const CorpusScore s = score_corpus(ck.params, ck.config, docs, context_len);
    if (json) {
      nlohmann::ordered_json j;
      j["perplexity"] = s.perplexity();
      j["tokens"] = s.tokens;
      j["log_prob"] = s.total_log_prob;
      j["documents"] = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < s.doc_tokens.size(); ++i) {
        j["documents"].push_back({{"index", i},
                                  {"perplexity", s.doc_perplexity(i)},
                                  {"tokens", s.doc_tokens[i]},
                                  {"log_prob", s.doc_log_prob[i]}});
      }
      std::cout << j.dump(2) << "\n";
      return;
    }
    std::cout << "corpus\t" << fmt(s.perplexity()) << "\t" << s.tokens << "\n";
    for (std::size_t i = 0; i < s.doc_tokens.size(); ++i) {
      std::cout << "doc\t" << i << "\t" << fmt(s.doc_perplexity(i)) << "\t" << s.doc_tokens[i] << "\n";
    }
  }
};

struct Fisher {
  fs::path ckpt;
  fs::path vocab_path;
  fs::path corpus;
  fs::path out;
  std::size_t samples = 64;
  std::size_t batch_size = 1;
  std::size_t context_len = 128;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--ckpt", ckpt, "Checkpoint trained on task A")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab_path, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Task A corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output Fisher file")->required();
    app->add_option("--samples", samples, "Batches drawn with replacement");
    app->add_option("--batch-size", batch_size, "Windows per batch");
    app->add_option("--context-len", context_len, "Context tokens re-included in continuation windows");
    app->add_option("--seed", seed, "Random seed");
  }

  void run() const {
    const Checkpoint ck = load_checkpoint(ckpt);
    const Vocabulary vocab = Vocabulary::load(vocab_path);
    require_vocab_matches(vocab, ck.config);
    const auto docs = encode_all(vocab, load_documents(corpus));
    const auto windows = make_windows(docs, window_options(ck.config, context_len));
    save_fisher(out, ck.config, estimate_fisher(ck.params, ck.config, windows, samples, batch_size, seed));
  }
};

struct Finetune {
  OptimizerFlags opt;
  fs::path ckpt;
  fs::path vocab_path;
  fs::path corpus;
  fs::path fisher;
  fs::path out;
  std::vector<double> lambdas{0.01};
  std::size_t context_len = 128;
  bool average = false;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    opt.add(app, 1000, 0);
    opt.cfg.checkpoint_every = 500;
    app->add_option("--ckpt", ckpt, "Unadapted checkpoint (the EWC anchor)")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab_path, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Task B corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--fisher", fisher, "Fisher file of the anchor")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--lambda", lambdas, "EWC strength; several values run a sweep")->expected(1, -1);
    app->add_option("--context-len", context_len, "Context tokens re-included in continuation windows");
    app->add_flag("--average", average,
                  "Also write averaged.ckpt: the mean of all fine-tuning checkpoints and the unadapted one");
    app->add_option("--seed", seed, "Random seed");
  }

  void run() const {
    const Checkpoint base = load_checkpoint(ckpt);
    const Vocabulary vocab = Vocabulary::load(vocab_path);
    require_vocab_matches(vocab, base.config);
    const auto docs = encode_all(vocab, load_documents(corpus));
    const auto windows = make_windows(docs, window_options(base.config, context_len));
    EWCState ewc;
    ewc.anchor = base.params;
    ewc.fisher = load_fisher(fisher, base.config);
    for (double lambda : lambdas) {
      ewc.strength = lambda;
      const TrainResult r = finetune_ewc(base, windows, ewc, opt.cfg, seed);
      const fs::path dir = lambdas.size() == 1 ? out : out / ("lambda-" + fmt(lambda));
      write_run(dir, r);
      vocab.save(dir / "vocab.txt");
      if (average) {
        Checkpoint avg = restart_from(r.final);
        avg.params = average_checkpoints(r.checkpoints);
        save_checkpoint(dir / "averaged.ckpt", avg);
      }
      std::cerr << "lambda " << fmt(lambda) << ": final loss "
                << (r.log.empty() ? std::string("n/a") : fmt(r.log.back().loss)) << "\n";
    }
  }
};

struct Average {
  std::vector<fs::path> inputs;
  fs::path out;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("checkpoints", inputs, "Checkpoints to average")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output checkpoint")->required();
    app->add_option("--seed", seed, "Random seed (averaging is deterministic)");
  }

  void run() const {
    std::vector<Checkpoint> cks;
    for (const auto& p : inputs) cks.push_back(load_checkpoint(p));
    Checkpoint avg = restart_from(cks.front());
    avg.params = average_checkpoints(cks);
    save_checkpoint(out, avg);
  }
};

struct Rerank {
  fs::path nbest;
  std::optional<fs::path> docs;
  std::optional<fs::path> lm;
  std::optional<fs::path> vocab_path;
  fs::path out;
  std::optional<fs::path> trace;
  double lambda = 1.0;
  double tau = 0.0;
  std::size_t context_len = 128;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--nbest", nbest, "n-best file")->required()->check(CLI::ExistingFile);
    app->add_option("--docs", docs, "Document grouping file (one document otherwise)")
        ->check(CLI::ExistingFile);
    app->add_option("--lm", lm, "Document LM checkpoint (required unless --lambda is 0)")
        ->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab_path, "LM vocabulary (defaults to vocab.txt next to --lm)")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "Reranked one-best output")->required();
    app->add_option("--trace", trace, "Tab-separated replacement trace");
    app->add_option("--lambda", lambda, "LM weight");
    app->add_option("--tau", tau, "Translation-score threshold");
    app->add_option("--context-len", context_len, "Context tokens re-included in continuation windows");
    app->add_option("--seed", seed, "Random seed (reranking is deterministic)");
  }

  struct NullScorer : DocumentScorer {
    double score(const std::vector<std::vector<std::string>>&) const override { return 0.0; }
  };

  void run() const {
    const NBestDocument all = parse_nbest(nbest);
    std::vector<DocumentGroup> groups;
    if (docs) {
      groups = parse_document_groups(read_file(*docs), all.sentences.size());
    } else {
      DocumentGroup g{"0", {}};
      for (std::size_t i = 0; i < all.sentences.size(); ++i) g.sentence_ids.push_back(i);
      groups.push_back(std::move(g));
    }
    std::unique_ptr<DocumentScorer> scorer;
    if (lambda != 0.0) {
      if (!lm) throw UsageError("--lm is required when --lambda is not 0");
      const Checkpoint ck = load_checkpoint(*lm);
      const fs::path vp = vocab_path ? *vocab_path : lm->parent_path() / "vocab.txt";
      scorer = std::make_unique<ModelDocumentScorer>(ck.config, ck.params, Vocabulary::load(vp), context_len);
    } else {
      scorer = std::make_unique<NullScorer>();
    }
    RerankConfig rc{lambda, tau};
    std::vector<std::string> lines(all.sentences.size());
    std::ostringstream tr;
    tr << "doc_id\tsentence\told_rank\tnew_rank\tdelta\n";
    for (const auto& g : groups) {
      const RerankResult r = greedy_rerank(subset(all, g.sentence_ids), *scorer, rc);
      for (std::size_t i = 0; i < g.sentence_ids.size(); ++i) {
        const std::size_t sid = g.sentence_ids[i];
        std::string line;
        for (const auto& w : all.sentences[sid][r.selection[i]].tokens) line += (line.empty() ? "" : " ") + w;
        lines[sid] = std::move(line);
      }
      for (const auto& step : r.trace) {
        tr << g.doc_id << '\t' << g.sentence_ids[step.sentence] << '\t' << step.old_rank << '\t'
           << step.new_rank << '\t' << fmt(step.delta) << '\n';
      }
    }
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file_atomic(out, text);
    if (trace) write_file_atomic(*trace, tr.str());
  }
};

struct Filter {
  fs::path src;
  fs::path trg;
  std::string src_lang = "en";
  std::string trg_lang = "de";
  std::optional<fs::path> scores;
  std::optional<double> score_threshold;
  std::string out_prefix;
  std::optional<fs::path> report;
  FilterConfig cfg;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--src", src, "Source side")->required()->check(CLI::ExistingFile);
    app->add_option("--trg", trg, "Target side")->required()->check(CLI::ExistingFile);
    app->add_option("--src-lang", src_lang, "Expected source language");
    app->add_option("--trg-lang", trg_lang, "Expected target language");
    auto* sc = app->add_option("--scores", scores, "External pair scores, one per line")->check(CLI::ExistingFile);
    app->add_option("--score-threshold", score_threshold, "Minimum external score")->needs(sc);
    app->add_option("--out-prefix", out_prefix, "Writes <prefix>.src and <prefix>.trg")->required();
    app->add_option("--report", report, "JSON report path");
    app->add_option("--max-word-chars", cfg.max_word_chars, "Longest allowed word");
    app->add_option("--min-words", cfg.min_words, "Fewest words per side");
    app->add_option("--max-ratio", cfg.max_char_ratio, "Largest character-count ratio");
    app->add_option("--seed", seed, "Random seed (filtering is deterministic)");
  }

  void run() {
    cfg.source_language = src_lang;
    cfg.target_language = trg_lang;
    cfg.score_threshold = score_threshold;
    FilterPaths paths{src, trg, scores, out_prefix, report};
    const FilterReport r = filter_corpus(paths, cfg);
    std::cerr << "accepted " << r.accepted << " of " << r.total << " pairs\n";
  }
};

// ---------------------------------------------------------------------------
// Config files: "key = value" lines naming long flags without the dashes.
// Values given on the command line win.

bool on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

std::vector<std::string> split_values(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Returns the arguments after the subcommand with config-file entries appended.
std::vector<std::string> merge_config(CLI::App* sub, std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;
  std::string content;
  try {
    content = read_file(*path);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  std::istringstream is(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(*path + ": line " + std::to_string(line_no) + " is not 'key = value'");
    }
    std::string key(text::trim(t.substr(0, eq)));
    std::string value(text::trim(t.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || key == "help") {
      throw UsageError(*path + ": unknown key '" + key + "' for " + sub->get_name());
    }
    if (on_command_line(rest, flag)) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") {
        rest.push_back(flag);
      } else if (value != "false" && value != "0") {
        throw UsageError(*path + ": key '" + key + "' expects true or false");
      }
      continue;
    }
    rest.push_back(flag);
    for (auto& v : split_values(value)) rest.push_back(v);
  }
  return rest;
}

void log_resolved(CLI::App* sub) {
  std::cerr << "# " << sub->get_name() << " configuration\n";
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = opt->get_default_str();
    }
    std::cerr << name << " = " << value << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document-level language modelling toolkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  GenCorpus gen;
  Train train_cmd;
  EvalPpl eval;
  Fisher fisher;
  Finetune finetune;
  Average average;
  Rerank rerank;
  Filter filter;

  struct Entry {
    CLI::App* app;
    std::function<void()> run;
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", "key = value file; command-line flags override it");
    cmd.add(sub);
    entries.push_back({sub, [&cmd] { cmd.run(); }});
  };
  add("gen-corpus", "Generate a synthetic topic-coherent corpus", gen);
  add("train", "Train a language model", train_cmd);
  add("eval-ppl", "Report corpus and per-document perplexity", eval);
  add("fisher", "Estimate the empirical Fisher of a checkpoint", fisher);
  add("finetune", "EWC-regularized fine-tuning", finetune);
  add("average", "Average checkpoints", average);
  add("rerank", "Greedy document-level n-best reranking", rerank);
  add("filter", "Heuristic parallel corpus filtering", filter);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty()) {
      for (auto& e : entries) {
        if (e.app->get_name() != args[0]) continue;
        std::vector<std::string> rest(args.begin() + 1, args.end());
        rest = merge_config(e.app, rest);
        args.resize(1);
        args.insert(args.end(), rest.begin(), rest.end());
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  for (auto& e : entries) {
    if (!e.app->parsed()) continue;
    log_resolved(e.app);
    try {
      e.run();
    } catch (const UsageError& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return kExitRuntime;
    }
  }
  return 0;
}
