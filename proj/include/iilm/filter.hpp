#pragma once

// Heuristic filtering of parallel sentence pairs.
//
// Seven rules are always evaluated and every failure is reported:
//   language_id        detected language of each side matches the configured one
//   max_word_length    no word longer than 40 characters
//   html               no HTML tags
//   min_length         each side has at least 4 words
//   char_ratio         character counts within a factor of 3 of each other
//   digits             identical sequences of decimal digits on both sides
//   final_punctuation  both sides end with a punctuation mark
// An eighth rule, external_score, applies when a score threshold is set.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iilm {

struct LanguageGuess {
  std::string language;  // "und" when nothing matched
  double confidence = 0.0;
};

class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  virtual LanguageGuess detect(std::string_view text) const = 0;
};

// Character-trigram naive Bayes over lowercased letters. Confidence is the
// posterior of the winning language under a uniform prior.
class TrigramLanguageDetector : public LanguageDetector {
 public:
  void add_profile(const std::string& language, std::string_view sample);
  std::vector<std::string> languages() const;
  LanguageGuess detect(std::string_view text) const override;

  // Profiles for en, de, fr and es built from bundled sample text.
  static const TrigramLanguageDetector& builtin();

 private:
  struct Profile {
    std::map<std::u32string, double> counts;
    double total = 0.0;
  };
  std::map<std::string, Profile> profiles_;
};

// Character trigrams of the normalized text: letters lowercased, every other
// character a word separator, each word padded with one space on both sides.
std::vector<std::u32string> letter_trigrams(std::string_view text);

enum class FilterRule {
  LanguageId,
  MaxWordLength,
  Html,
  MinLength,
  CharRatio,
  Digits,
  FinalPunctuation,
  ExternalScore,
};

inline constexpr FilterRule kCoreRules[] = {
    FilterRule::LanguageId, FilterRule::MaxWordLength, FilterRule::Html,
    FilterRule::MinLength,  FilterRule::CharRatio,     FilterRule::Digits,
    FilterRule::FinalPunctuation,
};

std::string_view rule_name(FilterRule rule);

struct SentencePair {
  std::string source;
  std::string target;
  std::optional<double> external_score;
};

struct FilterConfig {
  std::string source_language = "en";
  std::string target_language = "de";
  std::size_t max_word_chars = 40;
  std::size_t min_words = 4;
  double max_char_ratio = 3.0;
  std::vector<std::string> final_punctuation = {".", "!", "?", ":", ";", "\"", "'", ")",
                                                "”", "…"};
  // Pairs whose external score is below this fail external_score; pairs
  // without a score fail it too when the threshold is set.
  std::optional<double> score_threshold;
  // nullptr selects TrigramLanguageDetector::builtin().
  std::shared_ptr<const LanguageDetector> detector;
};

struct FilterVerdict {
  bool accepted = true;
  std::vector<FilterRule> failed_rules;
};

// True when the pair satisfies the rule.
bool passes_rule(FilterRule rule, const SentencePair& pair, const FilterConfig& config);
FilterVerdict apply_rules(const SentencePair& pair, const FilterConfig& config);

// Ordered digit sequence (Unicode Nd characters) of a UTF-8 string.
std::u32string digit_sequence(std::string_view s);
bool contains_html(std::string_view s);

struct FilterReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rule_counts;  // every core rule present, 0 if never failed

  std::string to_json() const;
};

struct FilterOutput {
  std::vector<FilterVerdict> verdicts;
  FilterReport report;
};

FilterOutput filter_pairs(std::span<const SentencePair> pairs, const FilterConfig& config);

struct FilterPaths {
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> scores;  // one number per line
  std::string out_prefix;                        // writes <prefix>.src and <prefix>.trg
  std::optional<std::filesystem::path> report;   // JSON report
};

// Throws ValidationError when line counts differ (naming both counts).
// Accepted lines are written byte-for-byte in input order.
FilterReport filter_corpus(const FilterPaths& paths, const FilterConfig& config);

}  // namespace iilm
