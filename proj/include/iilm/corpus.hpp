#pragma once

// Corpus ingestion: whitespace tokenization, a closed vocabulary, documents
// terminated per sentence by the boundary token, and packing into windows.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace iilm {

using TokenId = std::int64_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBoundaryId = 1;
inline constexpr TokenId kUnknownId = 2;
inline constexpr std::size_t kReservedIds = 3;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBoundaryToken = "</s>";
inline constexpr std::string_view kUnknownToken = "<unk>";

// A document as read from disk. Every sentence ends with kBoundaryToken.
struct TextDocument {
  std::vector<std::vector<std::string>> sentences;

  bool operator==(const TextDocument&) const = default;
};

// A document over vocabulary ids. Every sentence is non-empty before its
// terminating kBoundaryId, which appears exactly once, in final position.
struct Document {
  std::vector<std::vector<TokenId>> sentences;

  std::size_t token_count() const;
  std::vector<TokenId> flatten() const;
  // Throws ValidationError if the boundary invariants do not hold.
  void validate() const;
};

// One sentence per line, blank lines separate documents. Throws IoError or
// EncodingError (with the 1-based line number).
std::vector<TextDocument> load_documents(const std::filesystem::path& path);
std::vector<TextDocument> parse_documents(std::string_view content);

class Vocabulary {
 public:
  // Only the three reserved entries.
  Vocabulary();
  // Non-reserved tokens in id order, starting at kReservedIds.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  // Unknown tokens map to kUnknownId.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  Document encode(const TextDocument& doc) const;
  std::vector<TokenId> encode_sentence(std::span<const std::string> words) const;
  // Drops reserved ids when skip_reserved is set.
  std::vector<std::string> decode(std::span<const TokenId> ids, bool skip_reserved = true) const;

  // One token per line; line n (1-based) holds id n-1, the first three lines
  // are the reserved markers.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens with count >= min_count, ordered by count descending then
// lexicographically. Reserved markers are never counted.
Vocabulary build_vocab(std::span<const TextDocument> documents, std::size_t min_count);

enum class WindowMode { Sentence, Document };

struct WindowOptions {
  WindowMode mode = WindowMode::Document;
  std::size_t max_len = 256;
  // Trailing context re-included at the start of a continuation window.
  std::size_t context_len = 128;
};

// One model input. Slot p predicts targets[p] from inputs[0..p]; inputs is
// targets shifted right by one, led by the boundary id (which is also the
// token preceding every sentence start).
struct TrainingWindow {
  std::vector<TokenId> targets;
  std::vector<TokenId> inputs;
  // Window-relative sentence of each target, non-decreasing from 0.
  std::vector<std::size_t> sentence_index;
  // 1 where the target contributes to the loss, 0 for context-only slots.
  std::vector<std::uint8_t> loss_mask;
  std::size_t doc_id = 0;
  // Document position of slot 0.
  std::size_t position_offset = 0;

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t loss_count() const;
};

// Greedy packing of whole sentences. Throws ValidationError when a single
// sentence is longer than max_len.
std::vector<TrainingWindow> make_windows(const Document& doc, const WindowOptions& options,
                                         std::size_t doc_id = 0);
std::vector<TrainingWindow> make_windows(std::span<const Document> docs,
                                         const WindowOptions& options);

}  // namespace iilm
