#include "iilm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "iilm/errors.hpp"
#include "iilm/io.hpp"
#include "iilm/text.hpp"

namespace iilm {

std::size_t Document::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<TokenId> Document::flatten() const {
  std::vector<TokenId> out;
  out.reserve(token_count());
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

void Document::validate() const {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    if (s.size() < 2) throw ValidationError("sentence " + std::to_string(i) + " is empty");
    if (s.back() != kBoundaryId) {
      throw ValidationError("sentence " + std::to_string(i) + " does not end with the boundary token");
    }
    if (std::find(s.begin(), s.end() - 1, kBoundaryId) != s.end() - 1) {
      throw ValidationError("sentence " + std::to_string(i) + " contains an inner boundary token");
    }
  }
}

std::vector<TextDocument> parse_documents(std::string_view content) {
  std::vector<TextDocument> docs;
  TextDocument cur;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto bad = text::find_invalid_utf8(line)) {
      throw EncodingError("invalid UTF-8 at byte " + std::to_string(*bad), line_no);
    }
    auto words = text::split_words(line);
    if (words.empty()) {
      if (!cur.sentences.empty()) docs.push_back(std::move(cur));
      cur = {};
      continue;
    }
    words.emplace_back(kBoundaryToken);
    cur.sentences.push_back(std::move(words));
  }
  if (!cur.sentences.empty()) docs.push_back(std::move(cur));
  return docs;
}

std::vector<TextDocument> load_documents(const std::filesystem::path& path) {
  return parse_documents(read_file(path));
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary()
    : tokens_{std::string(kPadToken), std::string(kBoundaryToken), std::string(kUnknownToken)} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : Vocabulary() {
  for (auto& t : tokens) {
    if (t.empty()) throw ValidationError("empty vocabulary entry");
    auto [it, inserted] = index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    if (!inserted) throw ValidationError("duplicate vocabulary entry '" + t + "'");
    tokens_.push_back(std::move(t));
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode_sentence(std::span<const std::string> words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size() + 1);
  for (const auto& w : words) {
    if (w == kBoundaryToken) continue;
    ids.push_back(id(w));
  }
  ids.push_back(kBoundaryId);
  return ids;
}

Document Vocabulary::encode(const TextDocument& doc) const {
  Document out;
  out.sentences.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) out.sentences.push_back(encode_sentence(s));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids, bool skip_reserved) const {
  std::vector<std::string> out;
  for (TokenId i : ids) {
    if (skip_reserved && i >= 0 && static_cast<std::size_t>(i) < kReservedIds) continue;
    out.push_back(token(i));
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ostringstream os;
  for (const auto& t : tokens_) os << t << '\n';
  write_file_atomic(path, os.str());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::istringstream is(content);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  const std::string_view reserved[] = {kPadToken, kBoundaryToken, kUnknownToken};
  if (lines.size() < kReservedIds) throw ParseError("vocabulary lacks reserved markers", lines.size() + 1);
  for (std::size_t i = 0; i < kReservedIds; ++i) {
    if (lines[i] != reserved[i]) {
      throw ParseError("expected reserved marker '" + std::string(reserved[i]) + "'", i + 1);
    }
  }
  std::vector<std::string> rest(lines.begin() + kReservedIds, lines.end());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i].empty()) throw ParseError("empty vocabulary entry", i + kReservedIds + 1);
  }
  return Vocabulary(std::move(rest));
}

Vocabulary build_vocab(std::span<const TextDocument> documents, std::size_t min_count) {
  if (min_count < 1) throw ValidationError("min_count must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : documents)
    for (const auto& s : d.sentences)
      for (const auto& w : s)
        if (w != kBoundaryToken && w != kPadToken && w != kUnknownToken) ++counts[w];
  if (counts.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (auto& [tok, c] : items)
    if (c >= min_count) kept.push_back(tok);
  return Vocabulary(std::move(kept));
}

// ---------------------------------------------------------------------------

std::size_t TrainingWindow::loss_count() const {
  return static_cast<std::size_t>(std::count(loss_mask.begin(), loss_mask.end(), std::uint8_t{1}));
}

namespace {

void append_sentence(TrainingWindow& w, const std::vector<TokenId>& s, std::size_t sent,
                     bool in_loss) {
  for (TokenId t : s) {
    w.inputs.push_back(w.targets.empty() ? kBoundaryId : w.targets.back());
    w.targets.push_back(t);
    w.sentence_index.push_back(sent);
    w.loss_mask.push_back(in_loss ? 1 : 0);
  }
}

}  // namespace

std::vector<TrainingWindow> make_windows(const Document& doc, const WindowOptions& options,
                                         std::size_t doc_id) {
  if (options.max_len < 2) throw ValidationError("max_len must be at least 2");
  doc.validate();
  const auto& sents = doc.sentences;
  std::vector<std::size_t> start_pos(sents.size() + 1, 0);
  for (std::size_t i = 0; i < sents.size(); ++i) {
    if (sents[i].size() > options.max_len) {
      throw ValidationError("sentence " + std::to_string(i) + " of document " +
                            std::to_string(doc_id) + " has " + std::to_string(sents[i].size()) +
                            " tokens, more than max_len " + std::to_string(options.max_len));
    }
    start_pos[i + 1] = start_pos[i] + sents[i].size();
  }

  std::vector<TrainingWindow> windows;
  if (options.mode == WindowMode::Sentence) {
    for (std::size_t i = 0; i < sents.size(); ++i) {
      TrainingWindow w;
      w.doc_id = doc_id;
      w.position_offset = start_pos[i];
      append_sentence(w, sents[i], 0, true);
      windows.push_back(std::move(w));
    }
    return windows;
  }

  std::size_t next = 0;
  while (next < sents.size()) {
    // Whole trailing sentences as context, bounded by context_len and by
    // the room the next sentence needs.
    std::size_t ctx_begin = next;
    std::size_t ctx_tokens = 0;
    while (ctx_begin > 0) {
      const std::size_t len = sents[ctx_begin - 1].size();
      if (ctx_tokens + len > options.context_len) break;
      if (ctx_tokens + len + sents[next].size() > options.max_len) break;
      ctx_tokens += len;
      --ctx_begin;
    }
    TrainingWindow w;
    w.doc_id = doc_id;
    w.position_offset = start_pos[ctx_begin];
    std::size_t local = 0;
    for (std::size_t i = ctx_begin; i < next; ++i) append_sentence(w, sents[i], local++, false);
    while (next < sents.size() && w.size() + sents[next].size() <= options.max_len) {
      append_sentence(w, sents[next], local++, true);
      ++next;
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<TrainingWindow> make_windows(std::span<const Document> docs,
                                         const WindowOptions& options) {
  std::vector<TrainingWindow> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto w = make_windows(docs[i], options, i);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace iilm
