#include "iilm/masks.hpp"

#include <string>

#include "iilm/errors.hpp"

namespace iilm {

namespace {

void check_segmentation(std::span<const std::size_t> sentence_index) {
  if (sentence_index.empty()) throw ValidationError("sentence index is empty");
  if (sentence_index[0] != 0) throw ValidationError("sentence index must start at 0");
  for (std::size_t i = 1; i < sentence_index.size(); ++i) {
    if (sentence_index[i] < sentence_index[i - 1]) {
      throw ValidationError("sentence index decreases at position " + std::to_string(i) + " (" +
                            std::to_string(sentence_index[i - 1]) + " -> " +
                            std::to_string(sentence_index[i]) + ")");
    }
  }
}

}  // namespace

AttentionMaskPair build_masks(std::span<const std::size_t> sentence_index) {
  check_segmentation(sentence_index);
  const std::size_t n = sentence_index.size();
  AttentionMaskPair m{BoolMatrix(n, n), BoolMatrix(n, n)};
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t k = 0; k <= q; ++k) {
      if (sentence_index[k] == sentence_index[q]) {
        m.intra.set(q, k, true);
      } else {
        m.inter.set(q, k, true);
      }
    }
  }
  return m;
}

BoolMatrix build_causal_mask(std::size_t length) {
  if (length == 0) throw ValidationError("causal mask length must be at least 1");
  BoolMatrix m(length, length);
  for (std::size_t q = 0; q < length; ++q)
    for (std::size_t k = 0; k <= q; ++k) m.set(q, k, true);
  return m;
}

BoolMatrix build_sentence_causal_mask(std::span<const std::size_t> sentence_index) {
  return build_masks(sentence_index).intra;
}

}  // namespace iilm
