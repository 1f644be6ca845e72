#pragma once

#include <string>

#include "lstmpf/network.hpp"
#include "lstmpf/synthdata.hpp"
#include "lstmpf/training.hpp"

namespace lstmpf {

// End-to-end run: corpus in (generated or loaded), trained postfilter and
// evaluation files out.
struct PipelineConfig {
    std::string manifest;    // existing corpus manifest; empty = synthesize
    CorpusShape shape;       // synthesis shape (when manifest is empty)
    DistortionSpec distortion;
    NetworkSpec network;
    TrainingConfig training;
    std::string out_dir;
};

struct PipelineResult {
    double baseline_mcd = 0.0;      // test bucket, source vs aligned target
    double postfiltered_mcd = 0.0;  // test bucket, filtered vs aligned target
    double improvement_percent = 0.0;
    double best_validation_mcd = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_evaluated = 0;
    bool diverged = false;
    bool early_stopped = false;

    std::string checkpoint_path;
    std::string epochs_csv;
    std::string baseline_csv;
    std::string postfiltered_csv;
    std::string summary_csv;
};

// Stages: generate|ingest -> align -> split -> train -> postfilter ->
// evaluate -> report. Any stage error is rethrown with the stage name
// prefixed. A corpus whose training bucket has baseline MCD 0 is refused
// ("nothing to learn"). On divergence the best evaluated parameters are
// still written and the result carries the flag.
PipelineResult run_pipeline(const PipelineConfig& config);

// The key=value block echoed into checkpoints and written next to results.
std::string describe_config(const PipelineConfig& config);

} // namespace lstmpf
