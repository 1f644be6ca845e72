#pragma once

#include <string>
#include <vector>

#include "lstmpf/kernels.hpp"
#include "lstmpf/types.hpp"

namespace lstmpf {

// Per-frame values of one cepstral coefficient across the three versions of
// an utterance, for trajectory plots.
struct TrajectoryTable {
    struct Row {
        double time_ms = 0.0;
        double natural = 0.0;
        double hts = 0.0;
        double postfiltered = 0.0;
    };
    std::size_t coefficient_index = 0;
    std::vector<Row> rows;
};

// Exact copies of mfcc[coeff] per frame; time = frame index * frame_shift_ms.
// The three utterances must have equal frame counts (align first).
TrajectoryTable export_trajectory(const Utterance& natural, const Utterance& hts,
                                  const Utterance& post, std::size_t coeff);

// CSV with header time_ms,natural,hts,postfiltered.
void write_trajectory_csv(const TrajectoryTable& table, const std::string& path);

inline constexpr std::size_t kDefaultEnvelopeBins = 256;

struct EnvelopeMatrix {
    std::size_t n_bins = 0;
    std::vector<Vector> rows; // frames x n_bins, log magnitude
};

// Cosine-series log envelope per frame over n_bins points of [0, pi]:
//   env(w_k) = c0 + 2 * sum_{d>=1} c_d * cos(d * w_k),  w_k = pi*k/(n_bins-1).
// With includes_c0 the stored vector is (c_0 .. c_{D-1}); otherwise it is
// (c_1 .. c_D) and c_0 is taken as 0. A parametric stand-in for spectrogram
// rendering; no mel-axis unwarping is applied.
EnvelopeMatrix mfcc_to_envelope(const Utterance& u, std::size_t n_bins = kDefaultEnvelopeBins,
                                bool includes_c0 = true);

// Headerless frames x bins CSV, one frame per line.
void write_envelope_csv(const EnvelopeMatrix& env, const std::string& path);

} // namespace lstmpf
