#pragma once

// Training with delayed (accumulated) Adam updates, EWC-regularized
// fine-tuning with an empirical Fisher estimate, and checkpoint averaging.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "iilm/corpus.hpp"
#include "iilm/model.hpp"
#include "iilm/tensor.hpp"

namespace iilm {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  // Micro-batches accumulated per parameter update.
  std::size_t delay = 1;
  std::size_t warmup = 400;
  // Micro-batch iterations; floor(iterations / delay) updates are applied.
  std::size_t iterations = 1000;
  // Windows per micro-batch.
  std::size_t batch_size = 8;
  // Snapshot every this many updates; 0 keeps only the final state.
  std::size_t checkpoint_every = 500;

  void validate() const;
  std::size_t updates() const { return iterations / delay; }
};

// Linear warmup to learning_rate, then inverse square-root decay. step is 1-based.
double scheduled_learning_rate(const OptimizerConfig& cfg, std::size_t step);

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::size_t step = 0;
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  AdamState optimizer;
  std::size_t iteration = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Fisher values share the checkpoint container; the config is stored so the
// name set can be checked on load.
void save_fisher(const std::filesystem::path& path, const ModelConfig& config,
                 const ModelParams& fisher);
ModelParams load_fisher(const std::filesystem::path& path, const ModelConfig& expected);

// EWC anchor: penalty strength * sum_i F_i (theta_i - anchor_i)^2.
struct EWCState {
  ModelParams anchor;
  ModelParams fisher;
  double strength = 0.01;

  // Throws ValidationError on mismatched names/shapes, negative or
  // non-finite Fisher values, or a negative strength.
  void validate() const;
  void check_compatible(const ModelParams& params) const;
};

double ewc_penalty_value(const ModelParams& params, const EWCState& ewc);
// Taped penalty; gradients flow into params.
Var ewc_penalty(Tape& tape, ModelParams& params, const EWCState& ewc);
// Mean token cross-entropy over the batch plus the penalty, on one tape.
Var ewc_loss(Tape& tape, ModelParams& params, const ModelConfig& config,
             std::span<const TrainingWindow> batch, const EWCState& ewc);

struct UpdateRecord {
  std::size_t update = 0;
  std::size_t iteration = 0;
  double loss = 0.0;     // mean token cross-entropy over the update's windows
  double penalty = 0.0;  // EWC term, 0 without EWC
  double learning_rate = 0.0;
  std::size_t tokens = 0;
};

struct TrainResult {
  Checkpoint final;
  // Snapshots every checkpoint_every updates, ending with the final state.
  std::vector<Checkpoint> checkpoints;
  std::vector<UpdateRecord> log;
};

// Windows are consumed as one stream, reshuffled with `seed` at every epoch,
// so an update always sees delay * batch_size consecutive stream entries.
// Gradients are summed over tokens and divided by the token count at update
// time. Throws TrainingError on a non-finite loss.
TrainResult train(Checkpoint start, std::span<const TrainingWindow> corpus,
                  const OptimizerConfig& cfg, std::uint64_t seed, const EWCState* ewc = nullptr);

// Copy of ckpt with the optimizer moments and step reset.
Checkpoint restart_from(const Checkpoint& ckpt);

// Fine-tunes a fresh optimizer from `start` on the EWC objective.
// checkpoints[0] is `start` itself, followed by the fine-tuning snapshots.
TrainResult finetune_ewc(const Checkpoint& start, std::span<const TrainingWindow> corpus_b,
                         const EWCState& ewc, const OptimizerConfig& cfg, std::uint64_t seed);

// Empirical Fisher: mean over batches of the squared gradient of the batch's
// mean token cross-entropy.
ModelParams estimate_fisher(const ModelParams& params, const ModelConfig& config,
                            std::span<const std::vector<TrainingWindow>> batches);
// n_samples batches of batch_size windows drawn uniformly with replacement.
ModelParams estimate_fisher(const ModelParams& params, const ModelConfig& config,
                            std::span<const TrainingWindow> corpus, std::size_t n_samples,
                            std::size_t batch_size, std::uint64_t seed);

// Uniform elementwise mean. Order-independent and exact for identical inputs.
ModelParams average_params(std::span<const ModelParams> params);
// Throws ValidationError listing differing config fields.
ModelParams average_checkpoints(std::span<const Checkpoint> checkpoints);

}  // namespace iilm
