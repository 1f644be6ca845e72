#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "lstmpf/errors.hpp"
#include "lstmpf/features_io.hpp"
#include "lstmpf/metrics.hpp"
#include "lstmpf/synthdata.hpp"
#include "test_util.hpp"

using namespace lstmpf;

namespace {

CorpusShape small_shape(std::size_t pairs = 3, std::size_t lo = 60, std::size_t hi = 80,
                        std::size_t dim = 4) {
    CorpusShape s;
    s.n_pairs = pairs;
    s.frames_lo = lo;
    s.frames_hi = hi;
    s.dim = dim;
    return s;
}

// Frame-weighted corpus MCD of source vs target for equal-length pairs.
double source_mcd(const Corpus& c, double percentile = 10.0) {
    std::vector<std::vector<Vector>> srcs(c.pairs.size()), tgts(c.pairs.size());
    std::vector<std::vector<bool>> masks(c.pairs.size());
    std::vector<McdTask> tasks(c.pairs.size());
    for (std::size_t k = 0; k < c.pairs.size(); ++k) {
        const ParallelPair& p = c.pairs[k];
        REQUIRE(p.source.size() == p.target.size());
        for (const auto& f : p.source.frames) {
            srcs[k].push_back(f.mfcc);
        }
        for (const auto& f : p.target.frames) {
            tgts[k].push_back(f.mfcc);
        }
        masks[k] = silence_mask(p.target, percentile);
        tasks[k] = McdTask{p.source.id, srcs[k], tgts[k], &masks[k]};
    }
    return corpus_mcd(tasks).corpus_mcd;
}

} // namespace

TEST_CASE("identity distortion reproduces the target exactly") {
    DistortionSpec spec; // defaults are the identity
    spec.seed = 7;
    const Corpus c = synth_corpus(small_shape(), spec);
    REQUIRE(c.pairs.size() == 3);
    for (const ParallelPair& p : c.pairs) {
        CHECK(p.already_aligned);
        CHECK(p.source == p.target);
    }
    CHECK(source_mcd(c) == 0.0);
}

TEST_CASE("width-3 smoothing matches a recomputed moving average") {
    DistortionSpec spec;
    spec.smoothing_width = 3;
    spec.seed = 11;
    const Corpus c = synth_corpus(small_shape(), spec);
    for (const ParallelPair& p : c.pairs) {
        const std::size_t frames = p.target.size();
        const std::size_t dim = p.target.dim();
        REQUIRE(p.source.size() == frames);
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t lo = t == 0 ? 0 : t - 1;
            const std::size_t hi = std::min(frames - 1, t + 1);
            for (std::size_t d = 0; d < dim; ++d) {
                double sum = 0.0;
                for (std::size_t k = lo; k <= hi; ++k) {
                    sum += p.target.frames[k].mfcc[d];
                }
                const double want =
                    static_cast<double>(static_cast<float>(sum / static_cast<double>(hi - lo + 1)));
                CHECK(p.source.frames[t].mfcc[d] == want);
            }
        }
    }
    // Smoothing sinusoidal trajectories is a real distortion.
    CHECK(source_mcd(c) > 0.0);
}

TEST_CASE("generation is deterministic in the seed") {
    DistortionSpec spec;
    spec.noise_sd = 0.2;
    spec.smoothing_width = 3;
    spec.seed = 21;
    const Corpus a = synth_corpus(small_shape(), spec);
    const Corpus b = synth_corpus(small_shape(), spec);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
        CHECK(a.pairs[k].source == b.pairs[k].source);
        CHECK(a.pairs[k].target == b.pairs[k].target);
    }
    spec.seed = 22;
    const Corpus c = synth_corpus(small_shape(), spec);
    bool any_diff = false;
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
        any_diff = any_diff || !(a.pairs[k].target == c.pairs[k].target);
    }
    CHECK(any_diff);
}

TEST_CASE("distortion grows monotonically with the noise level") {
    std::vector<double> mcds;
    for (double sd : {0.0, 0.1, 0.3}) {
        DistortionSpec spec;
        spec.noise_sd = sd;
        spec.seed = 33; // same trajectories and noise draws, scaled differently
        mcds.push_back(source_mcd(synth_corpus(small_shape(), spec)));
    }
    CHECK(mcds[0] == 0.0);
    CHECK(mcds[0] < mcds[1]);
    CHECK(mcds[1] < mcds[2]);
}

TEST_CASE("targets contain voiced and unvoiced stretches") {
    DistortionSpec spec;
    spec.seed = 44;
    const Corpus c = synth_corpus(small_shape(4, 60, 90, 3), spec);
    for (const ParallelPair& p : c.pairs) {
        std::size_t voiced = 0, unvoiced = 0;
        for (const auto& f : p.target.frames) {
            if (f.f0 > 0.0) {
                ++voiced;
                CHECK(f.f0 >= 60.0); // plausible pitch range
                CHECK(f.f0 <= 220.0);
            } else {
                ++unvoiced;
            }
        }
        CHECK(voiced > 0);
        CHECK(unvoiced > 0);
    }
}

TEST_CASE("tempo resampling changes the source length and drops alignment") {
    DistortionSpec spec;
    spec.tempo_factor = 1.3;
    spec.seed = 55;
    const Corpus c = synth_corpus(small_shape(), spec);
    for (const ParallelPair& p : c.pairs) {
        const auto want = static_cast<std::size_t>(
            std::llround(1.3 * static_cast<double>(p.target.size())));
        CHECK(p.source.size() == want);
        CHECK_FALSE(p.already_aligned);
        CHECK_FALSE(p.alignment.has_value());
        // Endpoints stay pinned to the target's endpoints (nearest f0).
        CHECK(p.source.frames.front().f0 == p.target.frames.front().f0);
        CHECK(p.source.frames.back().f0 == p.target.frames.back().f0);
    }

    spec.tempo_factor = 0.5;
    const Corpus d = synth_corpus(small_shape(), spec);
    for (const ParallelPair& p : d.pairs) {
        const auto want = static_cast<std::size_t>(
            std::llround(0.5 * static_cast<double>(p.target.size())));
        CHECK(p.source.size() == want);
    }
}

TEST_CASE("invalid shapes and specs are rejected") {
    const DistortionSpec ok;
    CHECK_THROWS_AS(synth_corpus(small_shape(2), ok), UsageError);
    CHECK_THROWS_AS(synth_corpus(small_shape(3, 60, 80, 0), ok), UsageError);
    CHECK_THROWS_AS(synth_corpus(small_shape(3, 1, 80), ok), UsageError);
    CHECK_THROWS_AS(synth_corpus(small_shape(3, 90, 80), ok), UsageError);

    DistortionSpec bad = ok;
    bad.smoothing_width = 4;
    CHECK_THROWS_AS(synth_corpus(small_shape(), bad), UsageError);
    bad = ok;
    bad.smoothing_width = 0;
    CHECK_THROWS_AS(synth_corpus(small_shape(), bad), UsageError);
    bad = ok;
    bad.noise_sd = -0.1;
    CHECK_THROWS_AS(synth_corpus(small_shape(), bad), UsageError);
    bad = ok;
    bad.tempo_factor = 0.4;
    CHECK_THROWS_AS(synth_corpus(small_shape(), bad), UsageError);
    bad = ok;
    bad.tempo_factor = 2.5;
    CHECK_THROWS_AS(synth_corpus(small_shape(), bad), UsageError);
    bad = ok;
    bad.warp_gain = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(synth_corpus(small_shape(), bad), UsageError);
}

TEST_CASE("warp compresses large values toward the gain ceiling") {
    DistortionSpec plain;
    plain.seed = 66;
    DistortionSpec warped = plain;
    warped.warp_gain = 0.8;
    const Corpus a = synth_corpus(small_shape(), plain);
    const Corpus b = synth_corpus(small_shape(), warped);
    bool any_changed = false;
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
        for (std::size_t t = 0; t < a.pairs[k].source.size(); ++t) {
            for (std::size_t d = 0; d < a.pairs[k].source.dim(); ++d) {
                const double v = a.pairs[k].source.frames[t].mfcc[d];
                const double w = b.pairs[k].source.frames[t].mfcc[d];
                CHECK(std::abs(w) <= 0.8 + 1e-9);
                CHECK(std::abs(w) <= std::abs(v) + 1e-9);
                any_changed = any_changed || v != w;
            }
        }
    }
    CHECK(any_changed);
}

TEST_CASE("synthetic corpora survive a file round trip exactly") {
    testutil::TempDir tmp("synthrt");
    DistortionSpec spec;
    spec.noise_sd = 0.15;
    spec.smoothing_width = 3;
    spec.tempo_factor = 1.2;
    spec.seed = 77;
    const Corpus c = synth_corpus(small_shape(), spec);
    const std::string manifest = store_corpus(c, tmp.file("corpus"));
    const Corpus back = load_corpus(manifest, c.name);
    REQUIRE(back.pairs.size() == c.pairs.size());
    for (std::size_t k = 0; k < c.pairs.size(); ++k) {
        CHECK(back.pairs[k].source == c.pairs[k].source);
        CHECK(back.pairs[k].target == c.pairs[k].target);
    }
}
