#pragma once

// Attention masks derived from sentence-boundary structure.
//
// For a query slot q in sentence s:
//   intra[q,k] = 1  iff  k <= q and k lies in sentence s
//   inter[q,k] = 1  iff  k lies in a sentence before s
// so intra and inter partition the causal prefix of q (self included in intra).

#include <cstddef>
#include <span>

#include "iilm/tensor.hpp"

namespace iilm {

struct AttentionMaskPair {
  BoolMatrix intra;
  BoolMatrix inter;
};

// sentence_index must be non-decreasing and start at 0; throws ValidationError otherwise.
AttentionMaskPair build_masks(std::span<const std::size_t> sentence_index);

// mask[q,k] = 1 iff k <= q. Throws ValidationError for T = 0.
BoolMatrix build_causal_mask(std::size_t length);

// Block-diagonal causal mask: attention never leaves the query's sentence.
// Equal to build_masks(...).intra.
BoolMatrix build_sentence_causal_mask(std::span<const std::size_t> sentence_index);

}  // namespace iilm
