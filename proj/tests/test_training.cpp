#include <gtest/gtest.h>

#include <cmath>

#include "iilm/errors.hpp"
#include "iilm/training.hpp"
#include "support.hpp"

using namespace iilm;
using iilm::testing::tiny_config;

namespace {

std::vector<TrainingWindow> toy_windows(std::size_t n_docs, std::uint64_t seed, std::size_t vocab = 16) {
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n_docs; ++i) docs.push_back(iilm::testing::random_document(rng, 2, 4, vocab));
  WindowOptions o;
  o.max_len = 64;
  return make_windows(docs, o);
}

Checkpoint fresh(const ModelConfig& c, std::uint64_t seed) {
  Checkpoint ck;
  ck.config = c;
  ck.params = init_params(c, seed);
  return ck;
}

OptimizerConfig quick_opt(std::size_t iterations) {
  OptimizerConfig o;
  o.learning_rate = 1e-2;
  o.warmup = 0;
  o.iterations = iterations;
  o.batch_size = 2;
  o.checkpoint_every = 0;
  return o;
}

double max_param_diff(const ModelParams& a, const ModelParams& b) {
  double m = 0.0;
  for (const auto& [name, t] : a) {
    const Tensor& u = b.at(name);
    for (std::size_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(t[i] - u[i]));
  }
  return m;
}

EWCState unit_ewc(const ModelParams& anchor, double fisher, double strength) {
  EWCState e;
  e.anchor = anchor;
  for (const auto& [name, t] : anchor) e.fisher.emplace(name, Tensor(t.shape(), fisher));
  e.strength = strength;
  return e;
}

}  // namespace

TEST(Schedule, WarmupThenInverseSqrt) {
  OptimizerConfig o;
  o.learning_rate = 1.0;
  o.warmup = 4;
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(o, 1), 0.25);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(o, 4), 1.0);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(o, 16), 0.5);
  o.warmup = 0;
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(o, 100), 1.0);
}

TEST(OptimizerConfig, UpdateCountAndValidation) {
  OptimizerConfig o;
  o.iterations = 10;
  o.delay = 4;
  EXPECT_EQ(o.updates(), 2u);
  o.delay = 0;
  EXPECT_THROW(o.validate(), ValidationError);
}

TEST(Train, MemorisesToyCorpus) {
  // Two fixed documents of about 100 tokens each.
  Rng rng(2);
  std::vector<Document> docs;
  for (int i = 0; i < 2; ++i) docs.push_back(iilm::testing::random_document(rng, 20, 4, 12));
  ModelConfig c = tiny_config(ModelMode::DocStandard, 12);
  c.d_model = 16;
  c.d_ff = 32;
  c.max_len = 128;
  WindowOptions wo;
  wo.max_len = 128;
  const auto windows = make_windows(docs, wo);
  OptimizerConfig o = quick_opt(400);
  o.batch_size = 1;
  const TrainResult r = train(fresh(c, 1), windows, o, 3);
  EXPECT_LT(std::log(perplexity(r.final.params, c, docs)), 0.1);
  EXPECT_EQ(r.log.size(), 400u);
}

TEST(Train, DelayedEqualsLargeBatch) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  const auto windows = toy_windows(12, 5);
  OptimizerConfig delayed = quick_opt(12);
  delayed.delay = 4;
  delayed.batch_size = 1;
  OptimizerConfig big = quick_opt(3);
  big.batch_size = 4;
  const TrainResult a = train(fresh(c, 2), windows, delayed, 8);
  const TrainResult b = train(fresh(c, 2), windows, big, 8);
  ASSERT_EQ(a.log.size(), 3u);
  ASSERT_EQ(b.log.size(), 3u);
  EXPECT_LT(max_param_diff(a.final.params, b.final.params), 1e-10);
}

TEST(Train, BitIdenticalUnderFixedSeed) {
  ModelConfig c = tiny_config(ModelMode::IntraInter);
  c.dropout = 0.1;
  const auto windows = toy_windows(6, 1);
  const TrainResult a = train(fresh(c, 4), windows, quick_opt(6), 11);
  const TrainResult b = train(fresh(c, 4), windows, quick_opt(6), 11);
  EXPECT_EQ(a.final.params, b.final.params);
  EXPECT_EQ(a.final.optimizer.m, b.final.optimizer.m);
  const TrainResult other = train(fresh(c, 4), windows, quick_opt(6), 12);
  EXPECT_NE(a.final.params, other.final.params);
}

TEST(Train, CheckpointSeries) {
  const ModelConfig c = tiny_config(ModelMode::DocStandard);
  OptimizerConfig o = quick_opt(7);
  o.checkpoint_every = 3;
  const TrainResult r = train(fresh(c, 1), toy_windows(4, 2), o, 1);
  ASSERT_EQ(r.checkpoints.size(), 3u);
  EXPECT_EQ(r.checkpoints[0].optimizer.step, 3u);
  EXPECT_EQ(r.checkpoints[1].optimizer.step, 6u);
  EXPECT_EQ(r.checkpoints[2].optimizer.step, 7u);
  EXPECT_EQ(r.checkpoints.back().params, r.final.params);
}

TEST(Train, NonFiniteLossNamesIteration) {
  const ModelConfig c = tiny_config(ModelMode::DocStandard);
  Checkpoint ck = fresh(c, 1);
  ck.params.at("out.b")[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(ck, toy_windows(2, 1), quick_opt(2), 1);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  iilm::testing::TempDir dir;
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  const TrainResult r = train(fresh(c, 1), toy_windows(3, 1), quick_opt(2), 1);
  save_checkpoint(dir / "a.ckpt", r.final);
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(back.config, c);
  EXPECT_EQ(back.params, r.final.params);
  EXPECT_EQ(back.optimizer.m, r.final.optimizer.m);
  EXPECT_EQ(back.optimizer.v, r.final.optimizer.v);
  EXPECT_EQ(back.optimizer.step, 2u);
  EXPECT_EQ(back.iteration, 2u);
}

TEST(Checkpoint, MismatchedNameSetFails) {
  iilm::testing::TempDir dir;
  Checkpoint ck = fresh(tiny_config(ModelMode::IntraInter), 1);
  ck.config.mode = ModelMode::DocStandard;
  EXPECT_THROW(save_checkpoint(dir / "x.ckpt", ck), ValidationError);
}

TEST(Ewc, ZeroStrengthEqualsCrossEntropy) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  ModelParams p = init_params(c, 3);
  const auto windows = toy_windows(2, 4);
  const EWCState e = unit_ewc(init_params(c, 9), 1.0, 0.0);
  Tape t1, t2;
  const double with = t1.scalar(ewc_loss(t1, p, c, windows, e));
  Var nll;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Var s = t2.nll_sum(forward(t2, p, c, windows[i]), windows[i].targets, windows[i].loss_mask);
    nll = i == 0 ? s : t2.add(nll, s);
    tokens += windows[i].loss_count();
  }
  EXPECT_EQ(with, t2.scalar(nll) * (1.0 / static_cast<double>(tokens)));
}

TEST(Ewc, PenaltyZeroAtAnchorAndHandComputed) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  ModelParams p = init_params(c, 3);
  EWCState e = unit_ewc(p, 1.0, 1.0);
  EXPECT_EQ(ewc_penalty_value(p, e), 0.0);
  p.at("out.b")[0] += 0.5;
  EXPECT_EQ(ewc_penalty_value(p, e), 0.25);
  const auto windows = toy_windows(1, 4);
  Tape t1, t2;
  const double l = t1.scalar(ewc_loss(t1, p, c, windows, e));
  e.strength = 0.0;
  const double lb = t2.scalar(ewc_loss(t2, p, c, windows, e));
  EXPECT_NEAR(l, lb + 0.25, 1e-12);
}

TEST(Ewc, PenaltyGradientIdentity) {
  const ModelConfig c = tiny_config(ModelMode::DocStandard);
  ModelParams p = init_params(c, 3);
  EWCState e;
  e.anchor = init_params(c, 4);
  Rng rng(5);
  for (const auto& [name, t] : p) {
    Tensor f(t.shape());
    for (auto& x : f.data()) x = rng.uniform();
    e.fisher.emplace(name, std::move(f));
  }
  e.strength = 0.7;
  Tape tape;
  tape.backward(ewc_penalty(tape, p, e));
  for (const auto& [name, t] : p) {
    const auto g = t.grad();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double expect = 2.0 * e.strength * e.fisher.at(name)[i] * (t[i] - e.anchor.at(name)[i]);
      ASSERT_NEAR(g[i], expect, 1e-12) << name;
    }
  }
  ModelParams small;
  small.emplace("out.b", p.at("out.b"));
  EWCState es;
  es.anchor.emplace("out.b", e.anchor.at("out.b"));
  es.fisher.emplace("out.b", e.fisher.at("out.b"));
  es.strength = e.strength;
  const auto r = iilm::testing::gradcheck(small, [&](Tape& t, ModelParams& ps) { return ewc_penalty(t, ps, es); });
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(Ewc, NameMismatchAndBadFisher) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  ModelParams p = init_params(c, 3);
  EWCState e = unit_ewc(p, 1.0, 1.0);
  e.anchor.erase("out.b");
  e.fisher.erase("out.b");
  EXPECT_THROW(ewc_penalty_value(p, e), ValidationError);
  EWCState neg = unit_ewc(p, -1.0, 1.0);
  EXPECT_THROW(neg.validate(), ValidationError);
}

TEST(Finetune, ZeroLambdaIsContinuedTraining) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  const auto wa = toy_windows(4, 1), wb = toy_windows(4, 2);
  const Checkpoint base = train(fresh(c, 1), wa, quick_opt(4), 1).final;
  const EWCState e = unit_ewc(base.params, 1.0, 0.0);
  OptimizerConfig o = quick_opt(5);
  o.checkpoint_every = 2;
  const TrainResult ft = finetune_ewc(base, wb, e, o, 7);
  const TrainResult plain = train(restart_from(base), wb, o, 7);
  EXPECT_EQ(ft.final.params, plain.final.params);
  ASSERT_EQ(ft.checkpoints.size(), plain.checkpoints.size() + 1);
  EXPECT_EQ(ft.checkpoints.front().params, base.params);
}

TEST(Finetune, StrongAnchorStaysPut) {
  const ModelConfig c = tiny_config(ModelMode::DocStandard);
  const Checkpoint base = fresh(c, 1);
  const EWCState e = unit_ewc(base.params, 1.0, 1e6);
  OptimizerConfig o = quick_opt(30);
  o.learning_rate = 1e-3;
  const TrainResult ft = finetune_ewc(base, toy_windows(4, 3), e, o, 1);
  EXPECT_LT(max_param_diff(ft.final.params, base.params), 1e-3);
}

TEST(Fisher, NonNegativeZeroForUnusedAndReproducible) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter, 20);
  const ModelParams p = init_params(c, 1);
  // Ids 3..15 only, so embedding rows 16..19 never receive gradient.
  const auto windows = toy_windows(5, 2, 16);
  const ModelParams f = estimate_fisher(p, c, windows, 6, 2, 9);
  for (const auto& [name, t] : f)
    for (double x : t.data()) ASSERT_GE(x, 0.0);
  const Tensor& emb = f.at("embed");
  for (std::size_t r = 16; r < 20; ++r)
    for (std::size_t j = 0; j < c.d_model; ++j) EXPECT_EQ(emb.at(r, j), 0.0);
  EXPECT_EQ(estimate_fisher(p, c, windows, 6, 2, 9), f);
  EXPECT_THROW(estimate_fisher(p, c, std::vector<TrainingWindow>{}, 4, 1, 1), ValidationError);
  EXPECT_THROW(estimate_fisher(p, c, windows, 0, 1, 1), ValidationError);
}

TEST(Fisher, BatchOrderInvariant) {
  const ModelConfig c = tiny_config(ModelMode::DocStandard);
  const ModelParams p = init_params(c, 1);
  const auto w = toy_windows(4, 3);
  std::vector<std::vector<TrainingWindow>> batches{{w[0], w[1]}, {w[2]}, {w[3]}};
  const ModelParams f1 = estimate_fisher(p, c, batches);
  std::vector<std::vector<TrainingWindow>> rev{batches[2], batches[0], batches[1]};
  const ModelParams f2 = estimate_fisher(p, c, rev);
  for (const auto& [name, t] : f1)
    for (std::size_t i = 0; i < t.numel(); ++i) ASSERT_NEAR(t[i], f2.at(name)[i], 1e-15 * (1 + t[i]));
}

TEST(Fisher, FileRoundTrip) {
  iilm::testing::TempDir dir;
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  const ModelParams f = estimate_fisher(init_params(c, 1), c, toy_windows(3, 1), 2, 1, 1);
  save_fisher(dir / "f.bin", c, f);
  EXPECT_EQ(load_fisher(dir / "f.bin", c), f);
  ModelConfig other = c;
  other.d_ff = 7;
  EXPECT_THROW(load_fisher(dir / "f.bin", other), ValidationError);
}

TEST(Average, IdempotentAndSimpleMean) {
  const ModelConfig c = tiny_config(ModelMode::IntraInter);
  const ModelParams p = init_params(c, 5);
  std::vector<ModelParams> copies(3, p);
  EXPECT_EQ(average_params(copies), p);

  ModelParams a, b;
  a.emplace("x", Tensor::vector({1.0}));
  b.emplace("x", Tensor::vector({3.0}));
  EXPECT_EQ(average_params(std::vector<ModelParams>{a, b}).at("x")[0], 2.0);
}

TEST(Average, ConfigMismatchListsFields) {
  Checkpoint a = fresh(tiny_config(ModelMode::IntraInter), 1);
  Checkpoint b = fresh(tiny_config(ModelMode::IntraInter), 2);
  b.config.dropout = 0.5;
  try {
    average_checkpoints(std::vector<Checkpoint>{a, b});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("dropout"), std::string::npos) << e.what();
  }
  EXPECT_THROW(average_checkpoints(std::vector<Checkpoint>{}), ValidationError);
}

TEST(Average, PermutationInvariantAndOracle) {
  const ModelConfig c = tiny_config(ModelMode::DocStandard);
  std::vector<ModelParams> ps{init_params(c, 1), init_params(c, 2), init_params(c, 3)};
  const ModelParams avg = average_params(ps);
  std::vector<ModelParams> perm{ps[2], ps[0], ps[1]};
  EXPECT_EQ(average_params(perm), avg);
  for (const auto& [name, t] : avg)
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double oracle = (ps[0].at(name)[i] + ps[1].at(name)[i] + ps[2].at(name)[i]) / 3.0;
      ASSERT_NEAR(t[i], oracle, 1e-15);
    }
}
