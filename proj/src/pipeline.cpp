#include "lstmpf/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lstmpf/alignment.hpp"
#include "lstmpf/errors.hpp"
#include "lstmpf/features_io.hpp"

namespace lstmpf {

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    const auto prefix = [name](const char* what) {
        return std::string(name) + ": " + what;
    };
    try {
        return fn();
    } catch (const UsageError& e) {
        throw UsageError(prefix(e.what()));
    } catch (const CorruptionError& e) {
        throw CorruptionError(prefix(e.what()));
    } catch (const FormatError& e) {
        throw FormatError(prefix(e.what()));
    } catch (const DivergenceError& e) {
        throw DivergenceError(prefix(e.what()));
    } catch (const DataError& e) {
        throw DataError(prefix(e.what()));
    }
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string dims_string(const NetworkDims& dims) {
    std::string s = std::to_string(dims.input);
    for (std::size_t h : dims.hidden) {
        s += ":" + std::to_string(h);
    }
    s += ":" + std::to_string(dims.output);
    return s;
}

struct EvalData {
    std::vector<PreparedPair> prepared;
    std::vector<std::vector<bool>> masks;
};

EvalData prepare_bucket(std::span<const ParallelPair> pairs, double silence_percentile) {
    EvalData data;
    data.prepared = prepare_pairs(pairs);
    data.masks.reserve(data.prepared.size());
    for (const PreparedPair& p : data.prepared) {
        data.masks.push_back(silence_mask(p.reference, silence_percentile));
    }
    return data;
}

McdReport evaluate_rows(const EvalData& data,
                        const std::vector<std::vector<Vector>>& target_rows,
                        std::size_t d_start) {
    std::vector<McdTask> tasks(data.prepared.size());
    for (std::size_t u = 0; u < data.prepared.size(); ++u) {
        tasks[u] = McdTask{data.prepared[u].id, target_rows[u], data.prepared[u].targets,
                           &data.masks[u]};
    }
    return corpus_mcd(tasks, d_start);
}

} // namespace

std::string describe_config(const PipelineConfig& config) {
    std::string s;
    s += "corpus=" + (config.manifest.empty() ? std::string("synthetic") : config.manifest) + "\n";
    if (config.manifest.empty()) {
        s += "pairs=" + std::to_string(config.shape.n_pairs) + "\n";
        s += "frames=" + std::to_string(config.shape.frames_lo) + "-" +
             std::to_string(config.shape.frames_hi) + "\n";
        s += "dim=" + std::to_string(config.shape.dim) + "\n";
        s += "smoothing-width=" + std::to_string(config.distortion.smoothing_width) + "\n";
        s += "warp-gain=" + fmt_real(config.distortion.warp_gain) + "\n";
        s += "noise-sd=" + fmt_real(config.distortion.noise_sd) + "\n";
        s += "tempo-factor=" + fmt_real(config.distortion.tempo_factor) + "\n";
        s += "data-seed=" + std::to_string(config.distortion.seed) + "\n";
    }
    s += "dims=" + dims_string(config.network.dims) + "\n";
    std::string kinds;
    for (LayerKind k : config.network.kinds) {
        if (!kinds.empty()) {
            kinds += ",";
        }
        kinds += k == LayerKind::lstm ? "lstm" : "rnn";
    }
    s += "layers=" + kinds + "\n";
    s += "hidden-gate=" +
         std::string(config.network.hidden_gate == HiddenGate::output ? "output" : "input") + "\n";
    s += "epochs=" + std::to_string(config.training.epochs) + "\n";
    s += "lr=" + fmt_real(config.training.learning_rate) + "\n";
    s += "momentum=" + fmt_real(config.training.momentum) + "\n";
    s += "clip=" +
         (config.training.grad_clip ? fmt_real(*config.training.grad_clip) : std::string("none")) +
         "\n";
    s += "split=" + fmt_real(config.training.split[0]) + "," + fmt_real(config.training.split[1]) +
         "," + fmt_real(config.training.split[2]) + "\n";
    s += "eval-every=" + std::to_string(config.training.eval_every) + "\n";
    s += "patience=" +
         (config.training.patience ? std::to_string(*config.training.patience)
                                   : std::string("none")) +
         "\n";
    s += "silence-percentile=" + fmt_real(config.training.silence_percentile) + "\n";
    s += "d-start=" + std::to_string(config.training.mcd_d_start) + "\n";
    s += "seed=" + std::to_string(config.training.seed) + "\n";
    return s;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    namespace fs = std::filesystem;
    if (config.out_dir.empty()) {
        throw UsageError("pipeline: output directory required");
    }
    fs::create_directories(config.out_dir);
    const auto out_path = [&config](const std::string& name) {
        return (fs::path(config.out_dir) / name).string();
    };

    const char* corpus_stage = config.manifest.empty() ? "generate" : "ingest";
    Corpus corpus = stage(corpus_stage, [&config] {
        Corpus c = config.manifest.empty() ? synth_corpus(config.shape, config.distortion)
                                           : load_corpus(config.manifest);
        validate_corpus(c);
        return c;
    });
    std::cerr << "[" << corpus_stage << "] " << corpus.pairs.size() << " pairs, dim "
              << corpus.dim << "\n";
    if (config.manifest.empty()) {
        stage("generate", [&] { store_corpus(corpus, out_path("corpus")); });
    }

    stage("align", [&corpus] {
        for (ParallelPair& pair : corpus.pairs) {
            if (!pair.already_aligned && !pair.alignment) {
                pair.alignment = dtw_align(pair.source, pair.target).path;
            }
        }
    });

    SplitCorpus split = stage("split", [&] {
        return split_corpus(corpus, config.training.split, config.training.seed);
    });
    std::cerr << "[split] train/validation/test = " << split.train.size() << "/"
              << split.validation.size() << "/" << split.test.size() << " pairs\n";

    PipelineResult result;
    result.checkpoint_path = out_path("checkpoint.ckpt");
    result.epochs_csv = out_path("epochs.csv");
    result.baseline_csv = out_path("baseline_mcd.csv");
    result.postfiltered_csv = out_path("postfiltered_mcd.csv");
    result.summary_csv = out_path("summary.csv");

    const TrainResult trained = stage("train", [&] {
        const EvalData train_data =
            prepare_bucket(split.train, config.training.silence_percentile);
        std::vector<std::vector<Vector>> source_rows;
        for (const PreparedPair& p : train_data.prepared) {
            source_rows.push_back(p.inputs);
        }
        const McdReport train_baseline =
            evaluate_rows(train_data, source_rows, config.training.mcd_d_start);
        if (train_baseline.corpus_mcd == 0.0) {
            throw DataError("nothing to learn, training-bucket baseline MCD is 0");
        }
        TrainResult r = train(split, config.network, config.training);
        Checkpoint ckpt;
        ckpt.params = r.params;
        ckpt.norm = r.norm;
        ckpt.seed = config.training.seed;
        ckpt.config_echo = describe_config(config);
        save_checkpoint(ckpt, result.checkpoint_path);
        write_epoch_csv(r.records, result.epochs_csv);
        return r;
    });
    result.best_validation_mcd = trained.best_validation_mcd;
    result.best_epoch = trained.best_epoch;
    result.epochs_evaluated = trained.records.size();
    result.diverged = trained.diverged;
    result.early_stopped = trained.early_stopped;
    std::cerr << "[train] best validation MCD " << fmt_real(trained.best_validation_mcd)
              << " at epoch " << trained.best_epoch
              << (trained.diverged ? " (diverged)" : "")
              << (trained.early_stopped ? " (early stop)" : "") << "\n";

    const EvalData test_data = stage("postfilter", [&] {
        return prepare_bucket(split.test, config.training.silence_percentile);
    });
    std::vector<std::vector<Vector>> filtered_rows(split.test.size());
    std::vector<std::vector<Vector>> source_rows(split.test.size());
    stage("postfilter", [&] {
        for (std::size_t u = 0; u < split.test.size(); ++u) {
            const Utterance filtered =
                postfilter_apply(trained.params, trained.norm, split.test[u].source);
            for (const FrameVector& fv : filtered.frames) {
                filtered_rows[u].push_back(fv.mfcc);
            }
            source_rows[u] = test_data.prepared[u].inputs;
        }
    });

    stage("evaluate", [&] {
        const McdReport baseline =
            evaluate_rows(test_data, source_rows, config.training.mcd_d_start);
        const McdReport filtered =
            evaluate_rows(test_data, filtered_rows, config.training.mcd_d_start);
        write_mcd_csv(baseline, result.baseline_csv);
        write_mcd_csv(filtered, result.postfiltered_csv);
        result.baseline_mcd = baseline.corpus_mcd;
        result.postfiltered_mcd = filtered.corpus_mcd;
        result.improvement_percent = improvement_percent(baseline, filtered);
    });
    std::cerr << "[evaluate] test baseline MCD " << fmt_real(result.baseline_mcd)
              << ", postfiltered " << fmt_real(result.postfiltered_mcd) << " ("
              << fmt_real(result.improvement_percent) << "% improvement)\n";

    stage("report", [&] {
        std::ofstream out(result.summary_csv, std::ios::trunc);
        if (!out) {
            throw FormatError("cannot open '" + result.summary_csv + "' for writing");
        }
        out << "metric,value\n";
        out << "baseline_mcd," << fmt_real(result.baseline_mcd) << "\n";
        out << "postfiltered_mcd," << fmt_real(result.postfiltered_mcd) << "\n";
        out << "improvement_percent," << fmt_real(result.improvement_percent) << "\n";
        out << "best_validation_mcd," << fmt_real(result.best_validation_mcd) << "\n";
        out << "best_epoch," << result.best_epoch << "\n";
        out << "epochs_evaluated," << result.epochs_evaluated << "\n";
        out << "diverged," << (result.diverged ? 1 : 0) << "\n";
        out << "early_stopped," << (result.early_stopped ? 1 : 0) << "\n";
        if (!out) {
            throw FormatError("write failure on '" + result.summary_csv + "'");
        }
    });
    return result;
}

} // namespace lstmpf
