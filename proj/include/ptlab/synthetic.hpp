#pragma once

#include <cstdint>

#include "ptlab/dataset.hpp"

namespace ptlab {

// Procedurally rendered digit corpus: 28x28 grayscale glyphs of the digits
// 0-9 with random affine jitter, brightness variation, and Gaussian noise.
// Labels cycle 0..9 so any count is near-balanced. Deterministic in
// (count, seed); every example consumes a fixed number of RNG draws so a
// sample's pixels depend only on its index.
Dataset make_synthetic_corpus(int count, uint64_t seed);

}  // namespace ptlab
