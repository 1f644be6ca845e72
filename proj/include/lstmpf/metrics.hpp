#pragma once

#include <span>
#include <string>
#include <vector>

#include "lstmpf/kernels.hpp"
#include "lstmpf/types.hpp"

namespace lstmpf {

// 10*sqrt(2)/ln(10), the mel-cepstral distortion scale in dB.
extern const double kMcdAlpha;

inline constexpr std::size_t kDefaultMcdDStart = 1;

struct McdResult {
    double mcd = 0.0;
    std::size_t frames_used = 0;
};

// MCD = (alpha / T') * sum over unmasked frames t of
//       sqrt( sum_{d=d_start}^{D-1} (target_d(t) - reference_d(t))^2 ),
// with T' the unmasked frame count. mask[t] == true excludes frame t.
// Throws DataError on length/dimension mismatch or when all frames are masked.
McdResult mcd_rows(std::span<const Vector> target, std::span<const Vector> reference,
                   const std::vector<bool>& mask, std::size_t d_start);
McdResult mcd(const Utterance& target, const Utterance& reference, const std::vector<bool>& mask,
              std::size_t d_start = kDefaultMcdDStart);

struct McdReport {
    struct Entry {
        std::string id;
        double mcd = 0.0;
        std::size_t frames_used = 0;
        std::size_t frames_excluded = 0;
    };
    std::vector<Entry> per_utterance;
    double corpus_mcd = 0.0;         // frame-weighted mean (headline)
    double utterance_mean_mcd = 0.0; // unweighted mean over utterances
    double alpha = 0.0;
};

// One evaluation unit: the rows being scored, the natural reference rows,
// and the silence mask (computed on the reference side).
struct McdTask {
    std::string id;
    std::span<const Vector> target;
    std::span<const Vector> reference;
    const std::vector<bool>* mask = nullptr;
};

// Evaluates every task (in parallel across tasks when kern::threads() > 1;
// results are identical regardless of thread count) and aggregates:
// corpus_mcd = sum(mcd_u * T'_u) / sum(T'_u).
McdReport corpus_mcd(std::span<const McdTask> tasks, std::size_t d_start = kDefaultMcdDStart);

// 100 * (baseline - treated) / baseline, over the frame-weighted corpus MCDs.
// The two reports must cover the same utterance id set.
double improvement_percent(const McdReport& baseline, const McdReport& treated);

// CSV: header `id,mcd,frames_used,frames_excluded`, one row per utterance,
// final `TOTAL` row carrying the frame-weighted corpus MCD.
void write_mcd_csv(const McdReport& report, const std::string& path);

} // namespace lstmpf
