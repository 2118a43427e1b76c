#include "iilm/synthetic.hpp"

#include "iilm/errors.hpp"
#include "iilm/random.hpp"

namespace iilm {

void TopicCorpusOptions::validate() const {
  if (documents < 1 || topics < 1 || words_per_topic < 1 || function_words < 1) {
    throw ValidationError("topic corpus sizes must be at least 1");
  }
  const std::size_t span = topic_span == 0 ? topics : topic_span;
  if (first_topic + span > topics) throw ValidationError("topic range exceeds the topic count");
  if (min_sentences < 1 || min_sentences > max_sentences) {
    throw ValidationError("sentence count range is empty");
  }
  if (min_words < 3 || min_words > max_words) {
    throw ValidationError("words per sentence must be a range starting at 3 or more");
  }
  if (!(topic_word_rate >= 0.0 && topic_word_rate <= 1.0)) {
    throw ValidationError("topic_word_rate must lie in [0,1]");
  }
}

std::string topic_word(std::size_t topic, std::size_t index) {
  return "t" + std::to_string(topic) + "w" + std::to_string(index);
}

std::string function_word(std::size_t index) { return "f" + std::to_string(index); }

std::vector<std::string> topic_corpus_words(const TopicCorpusOptions& options) {
  options.validate();
  std::vector<std::string> words;
  for (std::size_t t = 0; t < options.topics; ++t)
    for (std::size_t i = 0; i < options.words_per_topic; ++i) words.push_back(topic_word(t, i));
  for (std::size_t i = 0; i < options.function_words; ++i) words.push_back(function_word(i));
  return words;
}

std::vector<TextDocument> topic_corpus(const TopicCorpusOptions& options, std::uint64_t seed) {
  options.validate();
  const std::size_t span = options.topic_span == 0 ? options.topics : options.topic_span;
  Rng rng(seed);
  auto between = [&](std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); };

  std::vector<TextDocument> docs(options.documents);
  for (auto& doc : docs) {
    const std::size_t topic = options.first_topic + rng.index(span);
    const std::size_t n_sent = between(options.min_sentences, options.max_sentences);
    for (std::size_t s = 0; s < n_sent; ++s) {
      const std::size_t n_words = between(options.min_words, options.max_words);
      std::vector<std::string> sent;
      sent.push_back(topic_word(topic, rng.index(options.words_per_topic)));
      for (std::size_t w = 1; w + 1 < n_words; ++w) {
        if (rng.uniform() < options.topic_word_rate) {
          sent.push_back(topic_word(topic, rng.index(options.words_per_topic)));
        } else {
          sent.push_back(function_word(rng.index(options.function_words)));
        }
      }
      sent.push_back(sent.front());
      sent.emplace_back(kBoundaryToken);
      doc.sentences.push_back(std::move(sent));
    }
  }
  return docs;
}

std::string format_documents(const std::vector<TextDocument>& docs) {
  std::string out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (d > 0) out += '\n';
    for (const auto& s : docs[d].sentences) {
      bool first = true;
      for (const auto& w : s) {
        if (w == kBoundaryToken) continue;
        if (!first) out += ' ';
        out += w;
        first = false;
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace iilm
