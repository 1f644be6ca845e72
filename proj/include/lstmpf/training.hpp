#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lstmpf/features_io.hpp"
#include "lstmpf/metrics.hpp"
#include "lstmpf/network.hpp"
#include "lstmpf/types.hpp"

namespace lstmpf {

struct TrainingConfig {
    std::size_t epochs = 100;
    double learning_rate = 1e-4;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::optional<double> grad_clip = 5.0;     // global norm; nullopt disables
    std::array<double, 3> split = {0.70, 0.20, 0.10};
    std::size_t eval_every = 1;                // epochs between validation evals
    std::optional<std::size_t> patience;       // evals without improvement; nullopt disables
    double silence_percentile = kDefaultSilencePercentile;
    std::size_t mcd_d_start = kDefaultMcdDStart;
};

// Throws UsageError on out-of-range fields (ratios must be in (0,1) and sum
// to 1 within 1e-9).
void validate_config(const TrainingConfig& config);

struct SplitCorpus {
    std::vector<ParallelPair> train;
    std::vector<ParallelPair> validation;
    std::vector<ParallelPair> test;
};

// Whole-pair split: shuffle pair order with the seed, then assign pairs to
// train until its frame share reaches ratios[0], then to validation until
// ratios[0]+ratios[1], rest to test. Throws DataError when fewer than 3
// pairs or when any bucket ends up empty.
SplitCorpus split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed);

struct SequenceLoss {
    double loss = 0.0;
    std::vector<Vector> dys;
};

// loss = 1/2 * sum_t |y_t - t_t|^2, gradient y_t - t_t per frame.
SequenceLoss sequence_loss(std::span<const Vector> ys, std::span<const Vector> ts);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_mcd = 0.0;
    double wall_time_s = 0.0; // cumulative since training start
};

// CSV: epoch,train_loss,validation_mcd,wall_time_s
void write_epoch_csv(std::span<const EpochRecord> records, const std::string& path);

// A pair reduced to the network's time base: one input and one target mfcc
// row per source frame, plus the matched target frames for silence masking.
struct PreparedPair {
    std::string id;
    std::vector<Vector> inputs;          // source mfcc rows, raw
    std::vector<Vector> targets;         // aligned target mfcc rows, raw
    std::vector<FrameVector> reference;  // aligned target frames (for masks)
};

PreparedPair prepare_pair(const ParallelPair& pair);
std::vector<PreparedPair> prepare_pairs(std::span<const ParallelPair> pairs);

// Per-coefficient z-score statistics over the train bucket (population sd).
// Coefficients with sd <= sd_floor get sd 1 so constant features stay at 0.
Normalization fit_normalization(std::span<const PreparedPair> train, double sd_floor = 1e-9);

struct TrainResult {
    NetworkParams params;   // argmin validation MCD over all evaluations
    Normalization norm;
    std::vector<EpochRecord> records;
    double best_validation_mcd = 0.0;
    std::size_t best_epoch = 0;
    bool diverged = false;      // non-finite loss hit; params is last good best
    bool early_stopped = false; // patience exhausted
};

// Per-utterance full BPTT with SGD + momentum (v <- m*v - lr*g, theta += v)
// and optional global-norm clipping, on z-scored features. Training pairs
// are visited in seeded shuffled order, reshuffled each epoch. Records an
// initial epoch-0 evaluation, then one record per eval_every epochs.
// Validation MCD is silence-excluded and computed on denormalized outputs.
TrainResult train(const SplitCorpus& split, const NetworkSpec& spec,
                  const TrainingConfig& config);

// Runs the network over the utterance's mfcc rows (z-scored on input,
// denormalized on output); f0, energy, id, and frame shift pass through
// untouched.
Utterance postfilter_apply(const NetworkParams& params, const Normalization& norm,
                           const Utterance& u);

struct GradCheckReport {
    struct Entry {
        std::string tensor;
        double max_rel_err = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_err = 0.0;

    bool passed(double threshold = 1e-4) const { return max_rel_err < threshold; }
};

// Central-difference check of backward() against the squared-error loss on a
// random sequence: every parameter perturbed by +-epsilon, relative error
// |analytic - fd| / max(|analytic| + |fd|, 1e-8). Guarded to small nets
// (every dim <= 8, seq_len <= 10); larger requests throw UsageError.
GradCheckReport gradient_check(const NetworkSpec& spec, std::uint64_t seed, std::size_t seq_len,
                               double epsilon);

} // namespace lstmpf
