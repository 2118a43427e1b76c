#pragma once

// Generated corpora with cross-sentence structure, for experiments where a
// real document corpus is unavailable.
//
// Every document draws one topic. Each sentence opens with a word of that
// topic, continues with a mix of shared function words and topic words, and
// closes by repeating its opening word. The topic is only recoverable from
// earlier sentences at a sentence's first slot.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "iilm/corpus.hpp"

namespace iilm {

struct TopicCorpusOptions {
  std::size_t documents = 2000;
  std::size_t topics = 8;
  std::size_t words_per_topic = 20;
  std::size_t function_words = 30;
  // Documents draw their topic from [first_topic, first_topic + topic_span);
  // topic_span 0 means all topics.
  std::size_t first_topic = 0;
  std::size_t topic_span = 0;
  std::size_t min_sentences = 5;
  std::size_t max_sentences = 8;
  // Words per sentence, boundary excluded. At least 3.
  std::size_t min_words = 3;
  std::size_t max_words = 6;
  double topic_word_rate = 0.5;

  void validate() const;
};

std::string topic_word(std::size_t topic, std::size_t index);
std::string function_word(std::size_t index);

// Every word the generator can emit, so vocabularies are identical across
// corpora drawn with different topic ranges.
std::vector<std::string> topic_corpus_words(const TopicCorpusOptions& options);

std::vector<TextDocument> topic_corpus(const TopicCorpusOptions& options, std::uint64_t seed);

// One sentence per line, documents separated by a blank line.
std::string format_documents(const std::vector<TextDocument>& docs);

}  // namespace iilm
