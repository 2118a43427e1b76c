#include <gtest/gtest.h>

#include <cmath>

#include "iilm/errors.hpp"
#include "iilm/masks.hpp"
#include "iilm/model.hpp"
#include "support.hpp"

using namespace iilm;
using iilm::testing::tiny_config;
using iilm::testing::whole_window;

namespace {

ModelParams rename_block(ModelParams p, const std::string& from, const std::string& to) {
  ModelParams out;
  for (auto& [name, t] : p) {
    std::string n = name;
    for (const auto& [a, b] : {std::pair{"." + from + ".", "." + to + "."},
                               std::pair{".ln_" + from + ".", ".ln_" + to + "."}}) {
      if (auto pos = n.find(a); pos != std::string::npos) n.replace(pos, a.size(), b);
    }
    out.emplace(n, std::move(t));
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool rows_equal(const Tensor& a, const Tensor& b, std::size_t r) {
  for (std::size_t c = 0; c < a.cols(); ++c)
    if (a.at(r, c) != b.at(r, c)) return false;
  return true;
}

Document fixed_document() {
  Document d;
  d.sentences = {{3, 4, 5, kBoundaryId}, {6, 7, kBoundaryId}, {8, 9, 10, 11, kBoundaryId}};
  return d;
}

}  // namespace

TEST(ModelConfig, ValidationAndRoundTrip) {
  ModelConfig c = tiny_config(ModelMode::DocStandard);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(ModelConfig::from_kv(c.to_kv()), c);
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config(ModelMode::DocStandard);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(parse_model_mode("bogus"), ValidationError);
  EXPECT_EQ(parse_model_mode(to_string(ModelMode::SentenceLevel)), ModelMode::SentenceLevel);
}

TEST(ModelParams, NameSetFollowsConfig) {
  const auto ii = parameter_shapes(tiny_config(ModelMode::IntraInter));
  const auto ds = parameter_shapes(tiny_config(ModelMode::DocStandard));
  EXPECT_TRUE(ii.count("layer0.intra.wq"));
  EXPECT_TRUE(ii.count("layer1.inter.bo"));
  EXPECT_FALSE(ii.count("layer0.attn.wq"));
  EXPECT_TRUE(ds.count("layer0.attn.wq"));
  EXPECT_EQ(ii.size(), ds.size() + 2 * 10);

  ModelParams p = init_params(tiny_config(ModelMode::IntraInter), 1);
  EXPECT_NO_THROW(check_params(tiny_config(ModelMode::IntraInter), p));
  EXPECT_THROW(check_params(tiny_config(ModelMode::DocStandard), p), ValidationError);
  p.erase("out.b");
  EXPECT_THROW(check_params(tiny_config(ModelMode::IntraInter), p), ValidationError);
}

TEST(ModelParams, MatchedWidthEqualisesCounts) {
  ModelConfig ref;
  ref.vocab_size = 300;
  const std::size_t ii = parameter_count(ref);
  for (auto mode : {ModelMode::DocStandard, ModelMode::SentenceLevel}) {
    ModelConfig c = ref;
    c.mode = mode;
    c.d_ff = matched_ff_width(ref, mode);
    const double per_unit = static_cast<double>((2 * ref.d_model + 1) * ref.n_layers);
    EXPECT_LE(std::abs(static_cast<double>(parameter_count(c)) - static_cast<double>(ii)), per_unit / 2 + 1);
    EXPECT_GT(c.d_ff, ref.d_ff);
  }
}

TEST(PositionalEncoding, OriginAndFormula) {
  const std::vector<std::size_t> zero{0};
  const Tensor pe0 = positional_encoding(zero, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(pe0[j], j % 2 == 0 ? 0.0 : 1.0);

  std::vector<std::size_t> pos(16);
  for (std::size_t i = 0; i < 16; ++i) pos[i] = i;
  const std::size_t d = 10;
  const Tensor pe = positional_encoding(pos, d);
  for (std::size_t p = 0; p < 16; ++p) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::exp(-std::log(10000.0) * (2.0 * static_cast<double>(i)) / static_cast<double>(d));
      EXPECT_NEAR(pe.at(p, 2 * i), std::sin(static_cast<double>(p) * freq), 1e-12);
      EXPECT_NEAR(pe.at(p, 2 * i + 1), std::cos(static_cast<double>(p) * freq), 1e-12);
    }
  }
}

TEST(PositionalEncoding, DocumentRelativeAcrossSentences) {
  // Second sentence starts at document position 10.
  Document d;
  d.sentences.push_back({3, 4, 5, 6, 7, 8, 9, 10, 11, kBoundaryId});
  d.sentences.push_back({12, 13, 14, 15, 16, kBoundaryId});
  const TrainingWindow w = whole_window(d);
  const auto doc_pos = window_positions(w, ModelMode::IntraInter);
  EXPECT_EQ(doc_pos[10], 10u);
  EXPECT_EQ(window_positions(w, ModelMode::DocStandard)[10], 10u);
  EXPECT_EQ(window_positions(w, ModelMode::SentenceLevel)[10], 0u);
  const Tensor pe = positional_encoding(w, tiny_config(ModelMode::IntraInter, 20));
  const std::vector<std::size_t> ten{10};
  const Tensor ref = positional_encoding(ten, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(pe.at(10, j), ref[j]);
}

TEST(Forward, LogitShape) {
  Rng rng(4);
  for (auto mode : {ModelMode::SentenceLevel, ModelMode::DocStandard, ModelMode::IntraInter}) {
    const ModelConfig c = tiny_config(mode, 23);
    const ModelParams p = init_params(c, 2);
    const TrainingWindow w = whole_window(iilm::testing::random_document(rng, 3, 5, 23));
    const Tensor logits = compute_logits(p, c, w);
    EXPECT_EQ(logits.shape(), (Shape{w.size(), 23}));
  }
}

TEST(Forward, RejectsOverlongWindow) {
  ModelConfig c = tiny_config(ModelMode::DocStandard);
  c.max_len = 4;
  const ModelParams p = init_params(c, 1);
  EXPECT_THROW(compute_logits(p, c, whole_window(fixed_document())), ValidationError);
}

TEST(Forward, SingleSentenceIntraInterEqualsDocStandard) {
  const ModelConfig ci = tiny_config(ModelMode::IntraInter);
  ModelConfig cd = ci;
  cd.mode = ModelMode::DocStandard;
  const ModelParams pi = init_params(ci, 3);
  ModelParams pd;
  for (const auto& [name, t] : rename_block(pi, "intra", "attn"))
    if (name.find("inter") == std::string::npos) pd.emplace(name, t);
  ASSERT_NO_THROW(check_params(cd, pd));
  Document d;
  d.sentences = {{3, 4, 5, 6, 7, kBoundaryId}};
  const TrainingWindow w = whole_window(d);
  EXPECT_EQ(compute_logits(pi, ci, w), compute_logits(pd, cd, w));
}

TEST(Forward, ContextSensitivityByMode) {
  Document a = fixed_document();
  Document b = a;
  b.sentences[0][1] = 12;  // change a token of sentence 1
  const TrainingWindow wa = whole_window(a), wb = whole_window(b);
  const std::size_t first_of_s2 = a.sentences[0].size();

  for (auto mode : {ModelMode::IntraInter, ModelMode::DocStandard}) {
    const ModelConfig c = tiny_config(mode);
    const ModelParams p = init_params(c, 8);
    const Tensor la = compute_logits(p, c, wa), lb = compute_logits(p, c, wb);
    for (std::size_t r = first_of_s2; r < wa.size(); ++r) EXPECT_FALSE(rows_equal(la, lb, r)) << r;
  }
  // The sentence model scores each sentence in isolation.
  const ModelConfig cs = tiny_config(ModelMode::SentenceLevel);
  const ModelParams ps = init_params(cs, 8);
  const auto sa = make_windows(a, window_options(cs));
  const auto sb = make_windows(b, window_options(cs));
  ASSERT_EQ(sa.size(), 3u);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_EQ(compute_logits(ps, cs, sa[i]), compute_logits(ps, cs, sb[i]));
  const auto lpa = log_prob(ps, cs, a), lpb = log_prob(ps, cs, b);
  for (std::size_t i = first_of_s2; i < lpa.size(); ++i) EXPECT_EQ(lpa[i], lpb[i]);
}

TEST(Forward, SentenceModelIgnoresOtherSentencesEvenInOneWindow) {
  const ModelConfig c = tiny_config(ModelMode::SentenceLevel);
  const ModelParams p = init_params(c, 5);
  Document a = fixed_document();
  Document b = a;
  b.sentences[0] = {9, 9, 9, 9, 9, kBoundaryId};
  const TrainingWindow wa = whole_window(a), wb = whole_window(b);
  const Tensor la = compute_logits(p, c, wa), lb = compute_logits(p, c, wb);
  const std::size_t na = a.sentences[0].size(), nb = b.sentences[0].size();
  for (std::size_t r = 0; r < a.sentences[1].size() + a.sentences[2].size(); ++r) {
    for (std::size_t k = 0; k < la.cols(); ++k) EXPECT_EQ(la.at(na + r, k), lb.at(nb + r, k));
  }
}

TEST(Forward, Causality) {
  Rng rng(6);
  for (auto mode : {ModelMode::SentenceLevel, ModelMode::DocStandard, ModelMode::IntraInter}) {
    const ModelConfig c = tiny_config(mode, 20);
    const ModelParams p = init_params(c, 9);
    for (int trial = 0; trial < 5; ++trial) {
      const Document d = iilm::testing::random_document(rng, 3, 4, 20);
      TrainingWindow w = whole_window(d);
      const Tensor base = compute_logits(p, c, w);
      const std::size_t q = rng.index(w.size() - 1);
      for (std::size_t i = q + 1; i < w.size(); ++i) w.inputs[i] = static_cast<TokenId>(3 + rng.index(17));
      const Tensor changed = compute_logits(p, c, w);
      for (std::size_t r = 0; r <= q; ++r) EXPECT_TRUE(rows_equal(base, changed, r)) << to_string(mode);
    }
  }
}

TEST(Forward, DropoutOnlyWithRng) {
  ModelConfig c = tiny_config(ModelMode::IntraInter);
  c.dropout = 0.3;
  ModelParams p = init_params(c, 1);
  const TrainingWindow w = whole_window(fixed_document());
  Tape t1, t2, t3;
  const Tensor plain = t1.value(forward(t1, p, c, w));
  Rng rng(1);
  const Tensor dropped = t2.value(forward(t2, p, c, w, {&rng}));
  const Tensor again = t3.value(forward(t3, p, c, w));
  EXPECT_EQ(plain, again);
  EXPECT_GT(max_abs_diff(plain, dropped), 0.0);
}

TEST(Gradcheck, AllModesThroughLoss) {
  Rng rng(12);
  for (auto mode : {ModelMode::SentenceLevel, ModelMode::DocStandard, ModelMode::IntraInter}) {
    ModelConfig c = tiny_config(mode, 11);
    c.d_model = 4;
    c.d_ff = 6;
    ModelParams p = init_params(c, 4);
    const TrainingWindow w = whole_window(iilm::testing::random_document(rng, 3, 2, 11));
    const auto r = iilm::testing::gradcheck(p, [&](Tape& t, ModelParams& ps) {
      return t.cross_entropy(forward(t, ps, c, w), w.targets, w.loss_mask);
    });
    EXPECT_LT(r.max_rel_error, 1e-3) << to_string(mode);
  }
}

TEST(LogProb, UniformModelAtInit) {
  ModelConfig c = tiny_config(ModelMode::IntraInter, 8);
  ModelParams p = init_params(c, 1);
  for (auto& x : p.at("out.w").data()) x = 0.0;
  Document d;
  d.sentences = {{3, 4, kBoundaryId}, {5, kBoundaryId}};
  for (double lp : log_prob(p, c, d)) EXPECT_NEAR(lp, -std::log(8.0), 1e-12);
  const std::vector<Document> corpus{d, d};
  EXPECT_NEAR(perplexity(p, c, corpus), 8.0, 1e-9);
}

TEST(LogProb, MatchesStepwiseDecoding) {
  // Re-score each token with a window that ends at it; causality makes the
  // last row of that prefix window the same distribution.
  for (auto mode : {ModelMode::DocStandard, ModelMode::IntraInter, ModelMode::SentenceLevel}) {
    const ModelConfig c = tiny_config(mode);
    const ModelParams p = init_params(c, 17);
    const Document d = fixed_document();
    const auto lp = log_prob(p, c, d);
    const TrainingWindow full = whole_window(d);
    ASSERT_EQ(lp.size(), full.size());
    double total = 0.0, stepwise = 0.0;
    std::size_t sent_start = 0;
    for (std::size_t q = 0; q < full.size(); ++q) {
      if (q > 0 && full.sentence_index[q] != full.sentence_index[q - 1]) sent_start = q;
      const std::size_t begin = mode == ModelMode::SentenceLevel ? sent_start : 0;
      TrainingWindow prefix;
      prefix.position_offset = begin;
      for (std::size_t i = begin; i <= q; ++i) {
        prefix.targets.push_back(full.targets[i]);
        prefix.inputs.push_back(i == begin && mode == ModelMode::SentenceLevel ? kBoundaryId : full.inputs[i]);
        prefix.sentence_index.push_back(full.sentence_index[i] - full.sentence_index[begin]);
        prefix.loss_mask.push_back(1);
      }
      const Tensor logp = log_softmax_rows(compute_logits(p, c, prefix));
      const double step = logp.at(prefix.size() - 1, static_cast<std::size_t>(full.targets[q]));
      EXPECT_NEAR(step, lp[q], 1e-12);
      stepwise += step;
      total += lp[q];
    }
    EXPECT_NEAR(total, stepwise, 1e-10);
    EXPECT_EQ(log_prob(p, c, d), lp);
  }
}

TEST(Perplexity, AggregatesPerDocumentSums) {
  Rng rng(40);
  const ModelConfig c = tiny_config(ModelMode::IntraInter, 30);
  const ModelParams p = init_params(c, 2);
  std::vector<Document> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back(iilm::testing::random_document(rng, 1 + rng.index(4), 6, 30));
  const CorpusScore s = score_corpus(p, c, corpus);
  double lp = 0.0;
  double tokens = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(s.doc_tokens[i], corpus[i].token_count());
    lp += std::log(s.doc_perplexity(i)) * static_cast<double>(s.doc_tokens[i]);
    tokens += static_cast<double>(s.doc_tokens[i]);
  }
  EXPECT_NEAR(std::log(s.perplexity()), lp / tokens, 1e-12);
  EXPECT_THROW(perplexity(p, c, std::vector<Document>{}), ValidationError);
}

TEST(LogProb, LongDocumentUsesContextWindows) {
  Rng rng(41);
  ModelConfig c = tiny_config(ModelMode::IntraInter, 30);
  c.max_len = 12;
  const ModelParams p = init_params(c, 2);
  const Document d = iilm::testing::random_document(rng, 10, 4, 30);
  const auto lp = log_prob(p, c, d, 6);
  EXPECT_EQ(lp.size(), d.token_count());
  for (double x : lp) EXPECT_TRUE(std::isfinite(x) && x < 0.0);
}
