#include "iilm/filter.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "json.hpp"

#include "iilm/errors.hpp"
#include "iilm/io.hpp"
#include "iilm/text.hpp"
#include "langid_samples.hpp"

namespace iilm {

// ---------------------------------------------------------------------------
// Language identification

namespace {

bool is_letter(char32_t c) {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
  if (c < 0xC0 || c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows
  if (c >= 0x3000 && c <= 0x303F) return false;
  return !text::is_space(c) && !text::is_decimal_digit(c);
}

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

}  // namespace

std::vector<std::u32string> letter_trigrams(std::string_view s) {
  std::vector<std::u32string> out;
  std::u32string word;
  auto flush = [&]() {
    if (word.empty()) return;
    const std::u32string padded = U" " + word + U" ";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.push_back(padded.substr(i, 3));
    word.clear();
  };
  for (char32_t c : text::decode_utf8(s)) {
    if (is_letter(c)) {
      word.push_back(to_lower(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

void TrigramLanguageDetector::add_profile(const std::string& language, std::string_view sample) {
  Profile& p = profiles_[language];
  for (const auto& t : letter_trigrams(sample)) {
    p.counts[t] += 1.0;
    p.total += 1.0;
  }
}

std::vector<std::string> TrigramLanguageDetector::languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, p] : profiles_) out.push_back(lang);
  return out;
}

LanguageGuess TrigramLanguageDetector::detect(std::string_view text) const {
  const auto grams = letter_trigrams(text);
  if (grams.empty() || profiles_.empty()) return {"und", 0.0};
  bool known = false;
  for (const auto& g : grams) {
    for (const auto& [lang, p] : profiles_) {
      if (p.counts.count(g)) {
        known = true;
        break;
      }
    }
    if (known) break;
  }
  if (!known) return {"und", 0.0};

  std::size_t distinct = 1;
  {
    std::map<std::u32string, int> all;
    for (const auto& [lang, p] : profiles_)
      for (const auto& [g, c] : p.counts) all[g] = 1;
    distinct += all.size();
  }
  constexpr double alpha = 0.5;
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& [lang, p] : profiles_) {
    const double denom = std::log(p.total + alpha * static_cast<double>(distinct));
    double ll = 0.0;
    for (const auto& g : grams) {
      auto it = p.counts.find(g);
      ll += std::log((it == p.counts.end() ? 0.0 : it->second) + alpha) - denom;
    }
    scores.emplace_back(lang, ll);
  }
  auto best = std::max_element(scores.begin(), scores.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  double z = 0.0;
  for (const auto& [lang, ll] : scores) z += std::exp(ll - best->second);
  return {best->first, 1.0 / z};
}

const TrigramLanguageDetector& TrigramLanguageDetector::builtin() {
  static const TrigramLanguageDetector det = [] {
    TrigramLanguageDetector d;
    d.add_profile("en", langid_samples::kEnglish);
    d.add_profile("de", langid_samples::kGerman);
    d.add_profile("fr", langid_samples::kFrench);
    d.add_profile("es", langid_samples::kSpanish);
    return d;
  }();
  return det;
}

// ---------------------------------------------------------------------------
// Rules

std::string_view rule_name(FilterRule rule) {
  switch (rule) {
    case FilterRule::LanguageId: return "language_id";
    case FilterRule::MaxWordLength: return "max_word_length";
    case FilterRule::Html: return "html";
    case FilterRule::MinLength: return "min_length";
    case FilterRule::CharRatio: return "char_ratio";
    case FilterRule::Digits: return "digits";
    case FilterRule::FinalPunctuation: return "final_punctuation";
    case FilterRule::ExternalScore: return "external_score";
  }
  return "?";
}

std::u32string digit_sequence(std::string_view s) {
  std::u32string out;
  for (char32_t c : text::decode_utf8(s))
    if (text::is_decimal_digit(c)) out.push_back(c);
  return out;
}

bool contains_html(std::string_view s) {
  static const std::regex generic("<[a-zA-Z/!][^>]*>");
  static const std::regex named(
      "</?(html|head|body|div|span|p|br|hr|a|img|script|style|table|tr|td|th|thead|tbody|ul|ol|"
      "li|b|i|u|em|strong|font|meta|link|iframe|form|input|button|h[1-6])([\\s/>]|$)",
      std::regex::icase);
  const std::string str(s);
  return std::regex_search(str, generic) || std::regex_search(str, named);
}

namespace {

const LanguageDetector& detector_of(const FilterConfig& config) {
  if (config.detector) return *config.detector;
  return TrigramLanguageDetector::builtin();
}

bool words_short_enough(std::string_view s, std::size_t max_chars) {
  for (const auto& w : text::split_words(s))
    if (text::codepoint_count(w) > max_chars) return false;
  return true;
}

bool ends_with_punctuation(std::string_view s, const std::vector<std::string>& marks) {
  std::u32string cps = text::decode_utf8(s);
  while (!cps.empty() && text::is_space(cps.back())) cps.pop_back();
  if (cps.empty()) return false;
  const std::string last = text::encode_utf8(cps.substr(cps.size() - 1));
  return std::find(marks.begin(), marks.end(), last) != marks.end();
}

}  // namespace

bool passes_rule(FilterRule rule, const SentencePair& pair, const FilterConfig& config) {
  switch (rule) {
    case FilterRule::LanguageId: {
      const auto& det = detector_of(config);
      return det.detect(pair.source).language == config.source_language &&
             det.detect(pair.target).language == config.target_language;
    }
    case FilterRule::MaxWordLength:
      return words_short_enough(pair.source, config.max_word_chars) &&
             words_short_enough(pair.target, config.max_word_chars);
    case FilterRule::Html:
      return !contains_html(pair.source) && !contains_html(pair.target);
    case FilterRule::MinLength:
      return text::split_words(pair.source).size() >= config.min_words &&
             text::split_words(pair.target).size() >= config.min_words;
    case FilterRule::CharRatio: {
      const auto s = static_cast<double>(text::codepoint_count(pair.source));
      const auto t = static_cast<double>(text::codepoint_count(pair.target));
      if (s == 0.0 || t == 0.0) return false;
      return s <= config.max_char_ratio * t && t <= config.max_char_ratio * s;
    }
    case FilterRule::Digits:
      return digit_sequence(pair.source) == digit_sequence(pair.target);
    case FilterRule::FinalPunctuation:
      return ends_with_punctuation(pair.source, config.final_punctuation) &&
             ends_with_punctuation(pair.target, config.final_punctuation);
    case FilterRule::ExternalScore:
      if (!config.score_threshold) return true;
      return pair.external_score && *pair.external_score >= *config.score_threshold;
  }
  return true;
}

FilterVerdict apply_rules(const SentencePair& pair, const FilterConfig& config) {
  FilterVerdict v;
  for (FilterRule r : kCoreRules)
    if (!passes_rule(r, pair, config)) v.failed_rules.push_back(r);
  if (config.score_threshold && !passes_rule(FilterRule::ExternalScore, pair, config)) {
    v.failed_rules.push_back(FilterRule::ExternalScore);
  }
  v.accepted = v.failed_rules.empty();
  return v;
}

std::string FilterReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["accepted"] = accepted;
  j["rejected"] = total - accepted;
  j["rules"] = nlohmann::ordered_json::object();
  for (const auto& [rule, n] : rule_counts) j["rules"][rule] = n;
  return j.dump(2) + "\n";
}

FilterOutput filter_pairs(std::span<const SentencePair> pairs, const FilterConfig& config) {
  FilterOutput out;
  for (FilterRule r : kCoreRules) out.report.rule_counts[std::string(rule_name(r))] = 0;
  if (config.score_threshold) out.report.rule_counts[std::string(rule_name(FilterRule::ExternalScore))] = 0;
  out.verdicts.reserve(pairs.size());
  for (const auto& p : pairs) {
    FilterVerdict v = apply_rules(p, config);
    ++out.report.total;
    if (v.accepted) ++out.report.accepted;
    for (FilterRule r : v.failed_rules) ++out.report.rule_counts[std::string(rule_name(r))];
    out.verdicts.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

struct Lines {
  std::vector<std::string> lines;
  bool trailing_newline = true;
};

Lines split_lines(const std::string& content) {
  Lines l;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) {
      l.lines.push_back(content.substr(pos));
      l.trailing_newline = false;
      break;
    }
    l.lines.push_back(content.substr(pos, end - pos));
    pos = end + 1;
  }
  return l;
}

}  // namespace

FilterReport filter_corpus(const FilterPaths& paths, const FilterConfig& config) {
  const Lines src = split_lines(read_file(paths.source));
  const Lines trg = split_lines(read_file(paths.target));
  if (src.lines.size() != trg.lines.size()) {
    throw ValidationError("source has " + std::to_string(src.lines.size()) + " lines but target has " +
                          std::to_string(trg.lines.size()));
  }
  std::vector<SentencePair> pairs(src.lines.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    pairs[i].source = src.lines[i];
    pairs[i].target = trg.lines[i];
  }
  if (paths.scores) {
    const Lines sc = split_lines(read_file(*paths.scores));
    if (sc.lines.size() != pairs.size()) {
      throw ValidationError("score file has " + std::to_string(sc.lines.size()) + " lines but corpus has " +
                            std::to_string(pairs.size()));
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::string field(text::trim(sc.lines[i]));
      try {
        std::size_t used = 0;
        pairs[i].external_score = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("bad score '" + field + "'", i + 1);
      }
    }
  }

  FilterOutput out = filter_pairs(pairs, config);
  std::string src_out, trg_out;
  const std::size_t n = pairs.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.verdicts[i].accepted) continue;
    src_out += src.lines[i];
    if (i + 1 < n || src.trailing_newline) src_out += '\n';
    trg_out += trg.lines[i];
    if (i + 1 < n || trg.trailing_newline) trg_out += '\n';
  }
  write_file_atomic(paths.out_prefix + ".src", src_out);
  write_file_atomic(paths.out_prefix + ".trg", trg_out);
  if (paths.report) write_file_atomic(*paths.report, out.report.to_json());
  return out.report;
}

}  // namespace iilm
