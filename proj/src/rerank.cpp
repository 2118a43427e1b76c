#include "iilm/rerank.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "iilm/errors.hpp"
#include "iilm/io.hpp"
#include "iilm/text.hpp"

namespace iilm {

void NBestDocument::validate() const {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& hyps = sentences[i];
    if (hyps.empty()) throw ValidationError("sentence " + std::to_string(i) + " has no hypotheses");
    for (std::size_t r = 0; r < hyps.size(); ++r) {
      if (!std::isfinite(hyps[r].score)) {
        throw ValidationError("sentence " + std::to_string(i) + " rank " + std::to_string(r + 1) +
                              " has a non-finite score");
      }
      if (r > 0 && hyps[r].score > hyps[r - 1].score) {
        throw ValidationError("scores of sentence " + std::to_string(i) + " increase at rank " +
                              std::to_string(r + 1));
      }
    }
  }
}

ModelDocumentScorer::ModelDocumentScorer(ModelConfig config, ModelParams params, Vocabulary vocab,
                                         std::size_t context_len)
    : config_(std::move(config)),
      params_(std::move(params)),
      vocab_(std::move(vocab)),
      context_len_(context_len) {
  check_params(config_, params_);
  if (vocab_.size() != config_.vocab_size) {
    throw ValidationError("vocabulary has " + std::to_string(vocab_.size()) +
                          " entries but the model expects " + std::to_string(config_.vocab_size));
  }
}

double ModelDocumentScorer::score(const std::vector<std::vector<std::string>>& sentences) const {
  Document doc;
  for (const auto& s : sentences) {
    // Empty hypotheses still contribute their boundary token.
    doc.sentences.push_back(vocab_.encode_sentence(s));
    if (doc.sentences.back().size() == 1) doc.sentences.back().insert(doc.sentences.back().begin(), kUnknownId);
  }
  if (doc.sentences.empty()) return 0.0;
  double total = 0.0;
  for (double lp : log_prob(params_, config_, doc, context_len_)) total += lp;
  return total;
}

void RerankConfig::validate() const {
  if (!std::isfinite(lm_weight) || lm_weight < 0.0) throw ValidationError("lm_weight must be finite and >= 0");
  if (!std::isfinite(threshold) || threshold < 0.0) throw ValidationError("threshold must be finite and >= 0");
}

double combined_score(const Selection& selection, const NBestDocument& doc,
                      const DocumentScorer& lm, double lm_weight) {
  if (selection.size() != doc.sentences.size()) {
    throw ValidationError("selection has " + std::to_string(selection.size()) + " entries for " +
                          std::to_string(doc.sentences.size()) + " sentences");
  }
  double t = 0.0;
  std::vector<std::vector<std::string>> text;
  text.reserve(selection.size());
  for (std::size_t i = 0; i < selection.size(); ++i) {
    if (selection[i] >= doc.sentences[i].size()) {
      throw ValidationError("selection index " + std::to_string(selection[i]) + " out of range for sentence " +
                            std::to_string(i) + " with " + std::to_string(doc.sentences[i].size()) +
                            " hypotheses");
    }
    const Hypothesis& h = doc.sentences[i][selection[i]];
    t += h.score;
    text.push_back(h.tokens);
  }
  if (lm_weight == 0.0) return t;
  return t + lm_weight * lm.score(text);
}

RerankResult greedy_rerank(const NBestDocument& doc, const DocumentScorer& lm,
                           const RerankConfig& config) {
  doc.validate();
  config.validate();
  RerankResult r;
  r.selection.assign(doc.sentences.size(), 0);
  double current = combined_score(r.selection, doc, lm, config.lm_weight);
  r.baseline_score = current;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i)
    if (doc.sentences[i].size() > 1) order.push_back(i);
  auto gap = [&](std::size_t i) { return doc.sentences[i][0].score - doc.sentences[i][1].score; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gap(a) < gap(b); });

  for (std::size_t i : order) {
    const auto& hyps = doc.sentences[i];
    const std::size_t old = r.selection[i];
    std::size_t best = old;
    double best_score = current;
    for (std::size_t h = 1; h < hyps.size(); ++h) {
      if (hyps[0].score - hyps[h].score > config.threshold) break;  // scores are sorted
      r.selection[i] = h;
      const double s = combined_score(r.selection, doc, lm, config.lm_weight);
      if (s > best_score) {
        best_score = s;
        best = h;
      }
    }
    r.selection[i] = best;
    if (best != old) {
      r.trace.push_back({i, old + 1, best + 1, best_score - current});
      current = best_score;
    }
  }
  r.final_score = current;
  return r;
}

// ---------------------------------------------------------------------------

NBestDocument parse_nbest_text(std::string_view content) {
  NBestDocument doc;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    if (auto bad = text::find_invalid_utf8(line)) {
      throw EncodingError("invalid UTF-8 at byte " + std::to_string(*bad), line_no);
    }
    const std::size_t a = line.find("|||");
    const std::size_t b = a == std::string_view::npos ? a : line.find("|||", a + 3);
    if (b == std::string_view::npos || line.find("|||", b + 3) != std::string_view::npos) {
      throw ParseError("expected 'sentence_id ||| hypothesis ||| score'", line_no);
    }
    const std::string_view id_field = text::trim(line.substr(0, a));
    const std::string_view hyp_field = text::trim(line.substr(a + 3, b - a - 3));
    const std::string score_field(text::trim(line.substr(b + 3)));

    std::size_t id = 0;
    auto [p, ec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), id);
    if (ec != std::errc() || p != id_field.data() + id_field.size() || id_field.empty()) {
      throw ParseError("bad sentence id '" + std::string(id_field) + "'", line_no);
    }
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(score_field, &used);
      if (used != score_field.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad score '" + score_field + "'", line_no);
    }
    if (!std::isfinite(score)) throw ParseError("non-finite score", line_no);

    if (id == doc.sentences.size()) {
      doc.sentences.emplace_back();
    } else if (id + 1 != doc.sentences.size()) {
      throw ValidationError("sentence id " + std::to_string(id) + " at line " +
                            std::to_string(line_no) + " breaks the contiguous order (expected " +
                            std::to_string(doc.sentences.size() - (doc.sentences.empty() ? 0 : 1)) +
                            " or " + std::to_string(doc.sentences.size()) + ")");
    }
    auto& hyps = doc.sentences.back();
    if (!hyps.empty() && score > hyps.back().score) {
      throw ValidationError("scores of sentence " + std::to_string(id) + " increase at line " +
                            std::to_string(line_no));
    }
    hyps.push_back({text::split_words(hyp_field), score});
  }
  return doc;
}

NBestDocument parse_nbest(const std::filesystem::path& path) {
  return parse_nbest_text(read_file(path));
}

std::vector<DocumentGroup> parse_document_groups(std::string_view content,
                                                 std::size_t sentence_count) {
  std::vector<DocumentGroup> groups;
  std::map<std::string, std::size_t> index;
  std::vector<bool> seen(sentence_count, false);
  std::istringstream is{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string doc_id;
    long long sid = -1;
    std::string extra;
    if (!(ls >> doc_id >> sid) || (ls >> extra) || sid < 0) {
      throw ParseError("expected 'doc_id sentence_id'", line_no);
    }
    const auto s = static_cast<std::size_t>(sid);
    if (s >= sentence_count) {
      throw ValidationError("sentence id " + std::to_string(s) + " at line " + std::to_string(line_no) +
                            " exceeds the n-best list (" + std::to_string(sentence_count) + " sentences)");
    }
    if (seen[s]) throw ValidationError("sentence id " + std::to_string(s) + " assigned twice");
    seen[s] = true;
    auto [it, inserted] = index.emplace(doc_id, groups.size());
    if (inserted) groups.push_back({doc_id, {}});
    groups[it->second].sentence_ids.push_back(s);
  }
  for (std::size_t s = 0; s < sentence_count; ++s) {
    if (!seen[s]) throw ValidationError("sentence id " + std::to_string(s) + " has no document");
  }
  for (auto& g : groups) std::sort(g.sentence_ids.begin(), g.sentence_ids.end());
  return groups;
}

NBestDocument subset(const NBestDocument& all, const std::vector<std::size_t>& sentence_ids) {
  NBestDocument d;
  for (std::size_t s : sentence_ids) d.sentences.push_back(all.sentences.at(s));
  return d;
}

}  // namespace iilm
