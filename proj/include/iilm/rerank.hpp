#pragma once

// Greedy document-level refinement of sentence-level n-best lists.
//
// Starting from the first-best hypotheses, sentences are visited once in
// ascending order of the score gap between their first- and second-best
// hypotheses. For each, hypotheses whose translation score lies within tau of
// the first-best are tried in rank order against the current document; the
// best strictly improving one is committed before moving on. The objective is
//   sum_i t(selected_i) + lambda_lm * log P_doc(selected document).

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iilm/corpus.hpp"
#include "iilm/model.hpp"

namespace iilm {

struct Hypothesis {
  std::vector<std::string> tokens;
  double score = 0.0;
};

// sentences[i] is ranked best-first: scores are non-increasing.
struct NBestDocument {
  std::vector<std::vector<Hypothesis>> sentences;

  // Throws ValidationError if a sentence is empty, a score is non-finite, or
  // scores increase with rank.
  void validate() const;
};

// Log-probability of a whole document given its sentences' tokens.
class DocumentScorer {
 public:
  virtual ~DocumentScorer() = default;
  virtual double score(const std::vector<std::vector<std::string>>& sentences) const = 0;
};

// Scores with a trained language model; words outside the vocabulary map to
// the unknown id.
class ModelDocumentScorer : public DocumentScorer {
 public:
  ModelDocumentScorer(ModelConfig config, ModelParams params, Vocabulary vocab,
                      std::size_t context_len = 128);
  double score(const std::vector<std::vector<std::string>>& sentences) const override;

 private:
  ModelConfig config_;
  ModelParams params_;
  Vocabulary vocab_;
  std::size_t context_len_;
};

struct RerankConfig {
  double lm_weight = 1.0;  // lambda_lm
  double threshold = 0.0;  // tau

  void validate() const;
};

// One selected hypothesis index (0 = first-best) per sentence.
using Selection = std::vector<std::size_t>;

// Throws ValidationError on a malformed selection.
double combined_score(const Selection& selection, const NBestDocument& doc,
                      const DocumentScorer& lm, double lm_weight);

struct RerankStep {
  std::size_t sentence = 0;
  std::size_t old_rank = 1;  // 1-based
  std::size_t new_rank = 1;
  double delta = 0.0;
};

struct RerankResult {
  Selection selection;
  std::vector<RerankStep> trace;
  double baseline_score = 0.0;
  double final_score = 0.0;
};

RerankResult greedy_rerank(const NBestDocument& doc, const DocumentScorer& lm,
                           const RerankConfig& config);

// "sentence_id ||| hypothesis text ||| score" per line, ids contiguous from 0,
// hypotheses of an id in rank order. Throws ParseError (malformed line) or
// ValidationError (non-monotone scores, non-contiguous ids).
NBestDocument parse_nbest(const std::filesystem::path& path);
NBestDocument parse_nbest_text(std::string_view content);

struct DocumentGroup {
  std::string doc_id;
  // Global sentence ids in ascending order.
  std::vector<std::size_t> sentence_ids;
};

// "doc_id sentence_id" per line. Every sentence of an n-best file with
// `sentence_count` sentences must be assigned exactly once. Documents keep the
// order of their first appearance.
std::vector<DocumentGroup> parse_document_groups(std::string_view content,
                                                 std::size_t sentence_count);
NBestDocument subset(const NBestDocument& all, const std::vector<std::size_t>& sentence_ids);

}  // namespace iilm
