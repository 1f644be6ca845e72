#pragma once

#include <cstdint>

#include "lstmpf/types.hpp"

namespace lstmpf {

// Degradation applied to the clean ("natural") side to manufacture the
// synthetic side of a pair. Defaults are the identity distortion.
struct DistortionSpec {
    std::size_t smoothing_width = 1; // odd; moving average over time, 1 = off
    double warp_gain = 0.0;          // x -> gain * tanh(x / gain); <= 0 = off
    double noise_sd = 0.0;           // additive Gaussian, per coefficient
    double tempo_factor = 1.0;       // source frame count scale, in [0.5, 2]
    std::uint64_t seed = 0;
};

struct CorpusShape {
    std::size_t n_pairs = 3;
    std::size_t frames_lo = 80;
    std::size_t frames_hi = 300;
    std::size_t dim = 39;
};

// Generates a parallel corpus: targets are sums of low-frequency sinusoids
// per coefficient with voiced/unvoiced f0 stretches; sources are the targets
// degraded by smoothing, then warp, then noise, then tempo resampling. All
// values are quantized to f32 so file round-trips reproduce the corpus
// exactly. Pairs are marked already-aligned only when tempo_factor == 1.
// Deterministic given the seed, with per-pair derived streams.
Corpus synth_corpus(const CorpusShape& shape, const DistortionSpec& spec);

} // namespace lstmpf
