#pragma once

// Ten sentence pairs: three clean, then one per core rule that breaks only
// that rule.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iilm/filter.hpp"

namespace iilm::testing {

struct FixturePair {
  std::string source;
  std::string target;
  std::string source_language;
  std::string target_language;
  std::optional<FilterRule> violates;
};

inline std::vector<FixturePair> filter_fixture() {
  const std::string long_word(41, 'a');
  return {
      {"The weather is very nice today.", "Das Wetter ist heute sehr schön.", "en", "de", std::nullopt},
      {"We bought 3 apples at the market.", "Wir kauften 3 Äpfel auf dem Markt.", "en", "de", std::nullopt},
      {"Please close the door behind you.", "Bitte schließe die Tür hinter dir.", "en", "de", std::nullopt},
      {"The train leaves early tomorrow morning.", "Le train part tôt demain matin.", "en", "fr",
       FilterRule::LanguageId},
      {"This word " + long_word + " is far too long.", "Dieses Wort ist wirklich viel zu lang.", "en", "de",
       FilterRule::MaxWordLength},
      {"Click <b>here</b> to continue reading.", "Klicken Sie <b>hier</b> um weiterzulesen.", "en", "de",
       FilterRule::Html},
      {"Thank you all.", "Danke euch allen.", "en", "de", FilterRule::MinLength},
      {"Yes, that is right.",
       "Ja, das ist völlig richtig, und ich stimme dir in allen Punkten ohne jede Einschränkung zu.", "en",
       "de", FilterRule::CharRatio},
      {"I have 12 cats.", "Ich habe 13 Katzen.", "en", "de", FilterRule::Digits},
      {"The meeting starts at noon", "Die Sitzung beginnt am Mittag", "en", "de", FilterRule::FinalPunctuation},
  };
}

// Answers from a fixed table; anything else is undetermined.
class TableDetector : public LanguageDetector {
 public:
  explicit TableDetector(std::map<std::string, std::string> table) : table_(std::move(table)) {}
  LanguageGuess detect(std::string_view text) const override {
    auto it = table_.find(std::string(text));
    if (it == table_.end()) return {"und", 0.0};
    return {it->second, 1.0};
  }

 private:
  std::map<std::string, std::string> table_;
};

inline std::shared_ptr<const LanguageDetector> fixture_detector() {
  std::map<std::string, std::string> table;
  for (const auto& p : filter_fixture()) {
    table[p.source] = p.source_language;
    table[p.target] = p.target_language;
  }
  return std::make_shared<TableDetector>(std::move(table));
}

}  // namespace iilm::testing
