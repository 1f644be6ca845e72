#include "lstmpf/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "lstmpf/errors.hpp"
#include "lstmpf/rng.hpp"

namespace lstmpf {

namespace {

double q32(double x) { return static_cast<double>(static_cast<float>(x)); }

struct Sinusoid {
    double amp = 0.0;
    double omega = 0.0;
    double phase = 0.0;

    double at(std::size_t t) const {
        return amp * std::sin(omega * static_cast<double>(t) + phase);
    }
};

Sinusoid draw_sinusoid(Rng& rng, double amp_lo, double amp_hi, double cycles_lo,
                       double cycles_hi) {
    Sinusoid s;
    s.amp = rng.uniform(amp_lo, amp_hi);
    s.omega = kTwoPi * rng.uniform(cycles_lo, cycles_hi) / 100.0; // cycles per 100 frames
    s.phase = rng.uniform(0.0, kTwoPi);
    return s;
}

void validate(const CorpusShape& shape, const DistortionSpec& spec) {
    if (shape.n_pairs < 3) {
        throw UsageError("synth_corpus: need at least 3 pairs");
    }
    if (shape.dim == 0) {
        throw UsageError("synth_corpus: dimension must be positive");
    }
    if (shape.frames_lo < 2 || shape.frames_lo > shape.frames_hi) {
        throw UsageError("synth_corpus: frame range must satisfy 2 <= lo <= hi");
    }
    if (spec.smoothing_width == 0 || spec.smoothing_width % 2 == 0) {
        throw UsageError("synth_corpus: smoothing width must be odd and positive");
    }
    if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) {
        throw UsageError("synth_corpus: noise sd must be a nonnegative finite real");
    }
    if (!(spec.tempo_factor >= 0.5 && spec.tempo_factor <= 2.0)) {
        throw UsageError("synth_corpus: tempo factor must lie in [0.5, 2.0]");
    }
    if (!std::isfinite(spec.warp_gain)) {
        throw UsageError("synth_corpus: warp gain must be finite");
    }
}

Utterance make_target(Rng& rng, const std::string& id, std::size_t frames, std::size_t dim) {
    // Voiced/unvoiced segmentation first, so masking is always exercised.
    std::vector<bool> voiced(frames);
    {
        bool state = rng.uniform01() < 0.7;
        std::size_t pos = 0;
        while (pos < frames) {
            const std::size_t len = state ? 20 + rng.below(21) : 5 + rng.below(11);
            for (std::size_t k = 0; k < len && pos < frames; ++k, ++pos) {
                voiced[pos] = state;
            }
            state = !state;
        }
    }

    const double f0_base = rng.uniform(100.0, 180.0);
    const Sinusoid f0_mod = draw_sinusoid(rng, 20.0, 30.0, 0.5, 2.0);
    const Sinusoid energy_mod = draw_sinusoid(rng, 0.15, 0.25, 0.5, 2.0);

    std::vector<double> offsets(dim);
    std::vector<std::array<Sinusoid, 3>> parts(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        offsets[d] = rng.uniform(-0.5, 0.5);
        for (std::size_t j = 0; j < 3; ++j) {
            Sinusoid s = draw_sinusoid(rng, 0.3, 1.0, 0.5, 3.0);
            s.amp /= static_cast<double>(j + 1);
            parts[d][j] = s;
        }
    }

    Utterance u;
    u.id = id;
    u.frame_shift_ms = 5.0;
    u.frames.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        FrameVector& fv = u.frames[t];
        fv.f0 = voiced[t] ? q32(f0_base + f0_mod.at(t)) : 0.0;
        const double e_base = voiced[t] ? 0.7 : 0.12;
        const double e_scale = voiced[t] ? 1.0 : 0.4;
        fv.energy = q32(e_base + e_scale * energy_mod.at(t));
        fv.mfcc.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double v = offsets[d];
            for (const Sinusoid& s : parts[d]) {
                v += s.at(t);
            }
            fv.mfcc[d] = q32(v);
        }
    }
    return u;
}

Utterance make_source(Rng& noise_rng, const Utterance& target, const DistortionSpec& spec,
                      std::size_t dim) {
    const std::size_t frames = target.size();

    // Distort on the target time base: smooth, warp, noise.
    std::vector<std::vector<double>> mfcc(frames, std::vector<double>(dim));
    const std::size_t half = spec.smoothing_width / 2;
    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(frames - 1, t + half);
        for (std::size_t d = 0; d < dim; ++d) {
            double sum = 0.0;
            for (std::size_t k = lo; k <= hi; ++k) {
                sum += target.frames[k].mfcc[d];
            }
            mfcc[t][d] = sum / static_cast<double>(hi - lo + 1);
        }
    }
    if (spec.warp_gain > 0.0) {
        for (auto& row : mfcc) {
            for (double& v : row) {
                v = spec.warp_gain * std::tanh(v / spec.warp_gain);
            }
        }
    }
    for (auto& row : mfcc) {
        for (double& v : row) {
            const double z = noise_rng.gauss(); // drawn even at sd 0, for comparability
            v += spec.noise_sd * z;
        }
    }

    Utterance u;
    u.id = target.id;
    u.frame_shift_ms = target.frame_shift_ms;

    const auto out_frames = static_cast<std::size_t>(std::max<long long>(
        2, std::llround(spec.tempo_factor * static_cast<double>(frames))));
    u.frames.resize(out_frames);
    if (out_frames == frames) {
        for (std::size_t t = 0; t < frames; ++t) {
            FrameVector& fv = u.frames[t];
            fv.f0 = target.frames[t].f0;
            fv.energy = target.frames[t].energy;
            fv.mfcc.resize(dim);
            for (std::size_t d = 0; d < dim; ++d) {
                fv.mfcc[d] = q32(mfcc[t][d]);
            }
        }
        return u;
    }

    for (std::size_t i = 0; i < out_frames; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(frames - 1) /
                           static_cast<double>(out_frames - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, frames - 1);
        const double w = pos - static_cast<double>(lo);
        FrameVector& fv = u.frames[i];
        const FrameVector& near = w < 0.5 ? target.frames[lo] : target.frames[hi];
        fv.f0 = near.f0;
        fv.energy = q32((1.0 - w) * target.frames[lo].energy + w * target.frames[hi].energy);
        fv.mfcc.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            fv.mfcc[d] = q32((1.0 - w) * mfcc[lo][d] + w * mfcc[hi][d]);
        }
    }
    return u;
}

} // namespace

Corpus synth_corpus(const CorpusShape& shape, const DistortionSpec& spec) {
    validate(shape, spec);

    Corpus corpus;
    corpus.name = "synth";
    corpus.dim = shape.dim;
    corpus.pairs.resize(shape.n_pairs);
    const bool aligned = spec.tempo_factor == 1.0;

    for (std::size_t k = 0; k < shape.n_pairs; ++k) {
        const std::uint64_t pair_seed = derive_seed(spec.seed, 1000 + k);
        Rng traj_rng(derive_seed(pair_seed, 1));
        Rng noise_rng(derive_seed(pair_seed, 2));

        char id[16];
        std::snprintf(id, sizeof(id), "utt%04zu", k);
        const std::size_t frames =
            shape.frames_lo + traj_rng.below(shape.frames_hi - shape.frames_lo + 1);

        ParallelPair& pair = corpus.pairs[k];
        pair.target = make_target(traj_rng, id, frames, shape.dim);
        pair.source = make_source(noise_rng, pair.target, spec, shape.dim);
        pair.already_aligned = aligned;
    }
    return corpus;
}

} // namespace lstmpf
