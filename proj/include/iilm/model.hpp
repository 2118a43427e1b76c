#pragma once

// Decoder-only Transformer language models over documents.
//
// Three variants share one parameter framework:
//   SentenceLevel  causal attention confined to the current sentence,
//                  positions restart at every sentence
//   DocStandard    one causal attention sublayer over the whole window
//   IntraInter     per layer, an intra-sentential attention sublayer followed
//                  by an inter-sentential one, each with its own projections
//
// All variants use pre-norm residual blocks and sinusoidal encodings of the
// document position, consumed by both attention sublayers.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "iilm/corpus.hpp"
#include "iilm/random.hpp"
#include "iilm/tensor.hpp"

namespace iilm {

enum class ModelMode { SentenceLevel, DocStandard, IntraInter };

std::string to_string(ModelMode mode);
// Accepts "sentence", "doc-standard", "intra-inter".
ModelMode parse_model_mode(std::string_view name);

struct ModelConfig {
  ModelMode mode = ModelMode::IntraInter;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = 256;
  double dropout = 0.1;

  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
  // Names of the fields that differ, empty when equal.
  std::vector<std::string> diff(const ModelConfig& other) const;

  bool operator==(const ModelConfig&) const = default;
};

using ModelParams = std::map<std::string, Tensor>;

std::map<std::string, Shape> parameter_shapes(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);
// Feed-forward width that brings a model of `mode` closest in parameter count
// to `reference` (an IntraInter model has one extra attention block per layer).
std::size_t matched_ff_width(const ModelConfig& reference, ModelMode mode);

ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
// Throws ValidationError if the name set or any shape disagrees with config.
void check_params(const ModelConfig& config, const ModelParams& params);

std::vector<std::size_t> window_positions(const TrainingWindow& window, ModelMode mode);
// PE[p,2i] = sin(p / 10000^(2i/d)), PE[p,2i+1] = cos(p / 10000^(2i/d)).
Tensor positional_encoding(std::span<const std::size_t> positions, std::size_t d_model);
Tensor positional_encoding(const TrainingWindow& window, const ModelConfig& config);

struct ForwardOptions {
  // Dropout is active only when an rng is supplied.
  Rng* dropout_rng = nullptr;
};

// Logits [T, vocab_size]. The mutable overload registers parameters as
// trainable leaves; the const overload treats them as constants and is safe
// to call concurrently on shared parameters.
Var forward(Tape& tape, ModelParams& params, const ModelConfig& config,
            const TrainingWindow& window, const ForwardOptions& options = {});
Var forward(Tape& tape, const ModelParams& params, const ModelConfig& config,
            const TrainingWindow& window);
Tensor compute_logits(const ModelParams& params, const ModelConfig& config,
                      const TrainingWindow& window);

WindowOptions window_options(const ModelConfig& config, std::size_t context_len = 128);

// Log-probability of every token of the document, in document order
// (boundary tokens included).
std::vector<double> log_prob(const ModelParams& params, const ModelConfig& config,
                             const Document& doc, std::size_t context_len = 128);

struct CorpusScore {
  double total_log_prob = 0.0;
  std::size_t tokens = 0;
  std::vector<double> doc_log_prob;
  std::vector<std::size_t> doc_tokens;

  double perplexity() const;
  double doc_perplexity(std::size_t i) const;
};

// Throws ValidationError for an empty corpus.
CorpusScore score_corpus(const ModelParams& params, const ModelConfig& config,
                         std::span<const Document> corpus, std::size_t context_len = 128);
double perplexity(const ModelParams& params, const ModelConfig& config,
                  std::span<const Document> corpus, std::size_t context_len = 128);

}  // namespace iilm
