#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lstmpf/alignment.hpp"
#include "lstmpf/errors.hpp"
#include "lstmpf/export.hpp"
#include "lstmpf/features_io.hpp"
#include "lstmpf/pipeline.hpp"
#include "lstmpf/synthdata.hpp"
#include "lstmpf/training.hpp"

namespace {

using namespace lstmpf;

NetworkDims parse_dims(const std::string& s) {
    NetworkDims dims;
    std::vector<std::size_t> sizes;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t next = s.find(':', pos);
        const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(tok, &used);
            if (used != tok.size() || v == 0) {
                throw std::invalid_argument(tok);
            }
            sizes.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("bad dims '" + s + "': expected positive integers like 39:200:160:200:39");
        }
        if (next == std::string::npos) {
            break;
        }
        pos = next + 1;
    }
    if (sizes.size() < 3) {
        throw UsageError("bad dims '" + s + "': need input, at least one hidden, and output");
    }
    dims.input = sizes.front();
    dims.output = sizes.back();
    dims.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
    return dims;
}

std::vector<LayerKind> parse_kinds(const std::string& s, std::size_t n_hidden) {
    if (s.empty()) {
        return std::vector<LayerKind>(n_hidden, LayerKind::lstm);
    }
    std::vector<LayerKind> kinds;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t next = s.find(',', pos);
        const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        if (tok == "lstm") {
            kinds.push_back(LayerKind::lstm);
        } else if (tok == "rnn") {
            kinds.push_back(LayerKind::rnn);
        } else {
            throw UsageError("bad layer kind '" + tok + "': expected lstm or rnn");
        }
        if (next == std::string::npos) {
            break;
        }
        pos = next + 1;
    }
    if (kinds.size() == 1 && n_hidden > 1) {
        kinds.assign(n_hidden, kinds.front());
    }
    if (kinds.size() != n_hidden) {
        throw UsageError("layer kinds count " + std::to_string(kinds.size()) +
                         " does not match hidden layer count " + std::to_string(n_hidden));
    }
    return kinds;
}

std::array<double, 3> parse_split(const std::string& s) {
    std::array<double, 3> split{};
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t next = s.find(',', pos);
        if ((k < 2) == (next == std::string::npos)) {
            throw UsageError("bad split '" + s + "': expected three comma-separated ratios");
        }
        const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            std::size_t used = 0;
            split[k] = std::stod(tok, &used);
            if (used != tok.size()) {
                throw std::invalid_argument(tok);
            }
        } catch (const std::exception&) {
            throw UsageError("bad split '" + s + "': expected three comma-separated ratios");
        }
        pos = next == std::string::npos ? s.size() + 1 : next + 1;
    }
    return split;
}

HiddenGate parse_gate(const std::string& s) {
    return s == "input" ? HiddenGate::input : HiddenGate::output;
}

// Shared option blocks, filled by CLI11 then converted to library structs.
struct NetOpts {
    std::string dims = "39:200:160:200:39";
    std::string layers;
    std::string gate = "output";

    void attach(CLI::App* sub) {
        sub->add_option("--dims", dims, "Layer sizes input:hidden...:output")
            ->capture_default_str();
        sub->add_option("--layers", layers,
                        "Hidden layer kinds, comma separated (lstm|rnn); default all lstm");
        sub->add_option("--hidden-gate", gate,
                        "Gate multiplying tanh(c) in the hidden output (study variant: input)")
            ->check(CLI::IsMember({"output", "input"}))
            ->capture_default_str();
    }

    NetworkSpec spec() const {
        NetworkSpec s;
        s.dims = parse_dims(dims);
        s.kinds = parse_kinds(layers, s.dims.hidden.size());
        s.hidden_gate = parse_gate(gate);
        return s;
    }
};

struct TrainOpts {
    std::size_t epochs = 100;
    double lr = 1e-4;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    double clip = 5.0;
    std::string split = "0.7,0.2,0.1";
    std::size_t eval_every = 1;
    std::size_t patience = 0;
    double silence_percentile = kDefaultSilencePercentile;
    std::size_t d_start = kDefaultMcdDStart;

    void attach(CLI::App* sub) {
        sub->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
        sub->add_option("--lr", lr, "Learning rate")->capture_default_str();
        sub->add_option("--momentum", momentum, "Momentum in [0,1)")->capture_default_str();
        sub->add_option("--seed", seed, "Root RNG seed")->capture_default_str();
        sub->add_option("--clip", clip, "Global-norm gradient clip; 0 disables")
            ->capture_default_str();
        sub->add_option("--split", split, "Train,validation,test frame-share ratios")
            ->capture_default_str();
        sub->add_option("--eval-every", eval_every, "Epochs between validation evaluations")
            ->capture_default_str();
        sub->add_option("--patience", patience,
                        "Stop after this many evaluations without improvement; 0 disables")
            ->capture_default_str();
        sub->add_option("--silence-percentile", silence_percentile,
                        "Energy percentile for the silence mask")
            ->capture_default_str();
        sub->add_option("--d-start", d_start, "First cepstral index included in MCD")
            ->capture_default_str();
    }

    TrainingConfig config() const {
        TrainingConfig c;
        c.epochs = epochs;
        c.learning_rate = lr;
        c.momentum = momentum;
        c.seed = seed;
        c.grad_clip = clip > 0.0 ? std::optional<double>(clip) : std::nullopt;
        c.split = parse_split(split);
        c.eval_every = eval_every;
        c.patience = patience > 0 ? std::optional<std::size_t>(patience) : std::nullopt;
        c.silence_percentile = silence_percentile;
        c.mcd_d_start = d_start;
        return c;
    }
};

struct SynthOpts {
    std::size_t pairs = 30;
    std::size_t frames_lo = 80;
    std::size_t frames_hi = 300;
    std::size_t dim = 39;
    std::size_t smoothing_width = 1;
    double warp_gain = 0.0;
    double noise_sd = 0.0;
    double tempo_factor = 1.0;
    std::uint64_t seed = 0;

    void attach(CLI::App* sub, const std::string& seed_flag) {
        sub->add_option("--pairs", pairs, "Number of parallel pairs")->capture_default_str();
        sub->add_option("--frames-lo", frames_lo, "Minimum frames per utterance")
            ->capture_default_str();
        sub->add_option("--frames-hi", frames_hi, "Maximum frames per utterance")
            ->capture_default_str();
        sub->add_option("--dim", dim, "Cepstral coefficients per frame")->capture_default_str();
        sub->add_option("--smoothing-width", smoothing_width,
                        "Odd moving-average width; 1 disables")
            ->capture_default_str();
        sub->add_option("--warp-gain", warp_gain, "tanh warp gain; 0 disables")
            ->capture_default_str();
        sub->add_option("--noise-sd", noise_sd, "Additive Gaussian noise sd")
            ->capture_default_str();
        sub->add_option("--tempo-factor", tempo_factor, "Source length scale in [0.5,2]")
            ->capture_default_str();
        sub->add_option(seed_flag, seed, "Corpus generation seed")->capture_default_str();
    }

    CorpusShape shape() const { return CorpusShape{pairs, frames_lo, frames_hi, dim}; }

    DistortionSpec distortion() const {
        return DistortionSpec{smoothing_width, warp_gain, noise_sd, tempo_factor, seed};
    }
};

void align_corpus(Corpus& corpus) {
    for (ParallelPair& pair : corpus.pairs) {
        if (!pair.already_aligned && !pair.alignment) {
            pair.alignment = dtw_align(pair.source, pair.target).path;
        }
    }
}

int run_app(int argc, char** argv) {
    CLI::App app{"LSTM postfilter for parametric speech features: data generation, alignment, "
                 "training, evaluation, and figure exports"};
    app.require_subcommand(1);
    int exit_code = 0;

    // synth-corpus
    {
        auto* sub = app.add_subcommand("synth-corpus", "Generate a parallel feature corpus");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto opts = std::make_shared<SynthOpts>();
        auto out = std::make_shared<std::string>();
        opts->attach(sub, "--seed");
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([opts, out] {
            Corpus corpus = synth_corpus(opts->shape(), opts->distortion());
            const std::string manifest = store_corpus(corpus, *out);
            std::cerr << "[synth-corpus] wrote " << corpus.pairs.size() << " pairs, manifest "
                      << manifest << "\n";
        });
    }

    // align
    {
        auto* sub = app.add_subcommand("align", "DTW-align two feature files");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto src = std::make_shared<std::string>();
        auto tgt = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--source", *src, "Synthetic-side feature file")->required();
        sub->add_option("--target", *tgt, "Natural-side feature file")->required();
        sub->add_option("--out", *out, "Alignment text output (i TAB j per step)")->required();
        sub->callback([src, tgt, out] {
            const Utterance source = read_utterance(*src);
            const Utterance target = read_utterance(*tgt);
            const AlignResult result = dtw_align(source, target);
            write_alignment_text(result.path, *out);
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.12g", result.cost);
            std::cerr << "[align] " << result.path.steps.size() << " steps, cost " << buf << "\n";
        });
    }

    // train
    {
        auto* sub = app.add_subcommand("train", "Train a postfilter on a corpus manifest");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto net = std::make_shared<NetOpts>();
        auto tr = std::make_shared<TrainOpts>();
        auto corpus_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto log_csv = std::make_shared<std::string>();
        auto threads = std::make_shared<int>(1);
        sub->add_option("--corpus", *corpus_path, "Corpus manifest")->required();
        net->attach(sub);
        tr->attach(sub);
        sub->add_option("--out", *out, "Checkpoint output path")->required();
        sub->add_option("--log", *log_csv, "Epoch CSV output path");
        sub->add_option("--threads", *threads, "Worker threads (1 = deterministic)")
            ->capture_default_str();
        sub->callback([net, tr, corpus_path, out, log_csv, threads, &exit_code] {
            kern::set_threads(*threads);
            Corpus corpus = load_corpus(*corpus_path);
            align_corpus(corpus);
            const TrainingConfig config = tr->config();
            const SplitCorpus split = split_corpus(corpus, config.split, config.seed);
            std::cerr << "[train] " << split.train.size() << "/" << split.validation.size()
                      << "/" << split.test.size() << " pairs per bucket\n";
            const TrainResult result = train(split, net->spec(), config);

            PipelineConfig echo;
            echo.manifest = *corpus_path;
            echo.network = net->spec();
            echo.training = config;
            Checkpoint ckpt;
            ckpt.params = result.params;
            ckpt.norm = result.norm;
            ckpt.seed = config.seed;
            ckpt.config_echo = describe_config(echo);
            save_checkpoint(ckpt, *out);
            if (!log_csv->empty()) {
                write_epoch_csv(result.records, *log_csv);
            }
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.12g", result.best_validation_mcd);
            std::cerr << "[train] best validation MCD " << buf << " at epoch "
                      << result.best_epoch << ", checkpoint " << *out << "\n";
            if (result.diverged) {
                std::cerr << "[train] diverged; checkpoint holds the best evaluated model\n";
                exit_code = 3;
            }
        });
    }

    // postfilter
    {
        auto* sub = app.add_subcommand("postfilter", "Run a trained postfilter over a feature file");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto model = std::make_shared<std::string>();
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto threads = std::make_shared<int>(1);
        sub->add_option("--model", *model, "Checkpoint path")->required();
        sub->add_option("--in", *in, "Input feature file")->required();
        sub->add_option("--out", *out, "Output feature file")->required();
        sub->add_option("--threads", *threads, "Worker threads (1 = deterministic)")
            ->capture_default_str();
        sub->callback([model, in, out, threads] {
            kern::set_threads(*threads);
            const Checkpoint ckpt = load_checkpoint(*model);
            const Utterance u = read_utterance(*in);
            const Utterance filtered = postfilter_apply(ckpt.params, ckpt.norm, u);
            write_utterance(filtered, *out);
            std::cerr << "[postfilter] " << u.size() << " frames -> " << *out << "\n";
        });
    }

    // evaluate
    {
        auto* sub = app.add_subcommand(
            "evaluate", "MCD report for a corpus manifest, optionally through a postfilter");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto corpus_path = std::make_shared<std::string>();
        auto model = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto d_start = std::make_shared<std::size_t>(kDefaultMcdDStart);
        auto percentile = std::make_shared<double>(kDefaultSilencePercentile);
        auto threads = std::make_shared<int>(1);
        sub->add_option("--corpus", *corpus_path, "Corpus manifest")->required();
        sub->add_option("--model", *model, "Checkpoint; when set, sources are postfiltered first");
        sub->add_option("--out", *out, "Report CSV path")->required();
        sub->add_option("--d-start", *d_start, "First cepstral index included in MCD")
            ->capture_default_str();
        sub->add_option("--silence-percentile", *percentile,
                        "Energy percentile for the silence mask")
            ->capture_default_str();
        sub->add_option("--threads", *threads, "Worker threads (1 = deterministic)")
            ->capture_default_str();
        sub->callback([corpus_path, model, out, d_start, percentile, threads] {
            kern::set_threads(*threads);
            Corpus corpus = load_corpus(*corpus_path);
            align_corpus(corpus);
            std::optional<Checkpoint> ckpt;
            if (!model->empty()) {
                ckpt = load_checkpoint(*model);
            }
            std::vector<PreparedPair> prepared = prepare_pairs(corpus.pairs);
            std::vector<std::vector<bool>> masks;
            std::vector<std::vector<Vector>> scored(prepared.size());
            for (std::size_t u = 0; u < prepared.size(); ++u) {
                masks.push_back(silence_mask(prepared[u].reference, *percentile));
                if (ckpt) {
                    const Utterance filtered =
                        postfilter_apply(ckpt->params, ckpt->norm, corpus.pairs[u].source);
                    for (const FrameVector& fv : filtered.frames) {
                        scored[u].push_back(fv.mfcc);
                    }
                } else {
                    scored[u] = prepared[u].inputs;
                }
            }
            std::vector<McdTask> tasks(prepared.size());
            for (std::size_t u = 0; u < prepared.size(); ++u) {
                tasks[u] = McdTask{prepared[u].id, scored[u], prepared[u].targets, &masks[u]};
            }
            const McdReport report = corpus_mcd(tasks, *d_start);
            write_mcd_csv(report, *out);
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.12g", report.corpus_mcd);
            std::cerr << "[evaluate] corpus MCD " << buf << " over " << report.per_utterance.size()
                      << " utterances -> " << *out << "\n";
        });
    }

    // export
    {
        auto* sub = app.add_subcommand("export", "Figure-data exports");
        sub->require_subcommand(1);
        {
            auto* traj = sub->add_subcommand("trajectory",
                                             "Per-frame coefficient values: natural, hts, postfiltered");
            traj->set_config("--config", "", "Read options from a key=value file");
            auto natural = std::make_shared<std::string>();
            auto hts = std::make_shared<std::string>();
            auto post = std::make_shared<std::string>();
            auto coeff = std::make_shared<std::size_t>(5);
            auto out = std::make_shared<std::string>();
            traj->add_option("--natural", *natural, "Natural feature file")->required();
            traj->add_option("--hts", *hts, "Synthetic feature file")->required();
            traj->add_option("--post", *post, "Postfiltered feature file")->required();
            traj->add_option("--coeff", *coeff, "Coefficient index")->capture_default_str();
            traj->add_option("--out", *out, "CSV output path")->required();
            traj->callback([natural, hts, post, coeff, out] {
                const TrajectoryTable table =
                    export_trajectory(read_utterance(*natural), read_utterance(*hts),
                                      read_utterance(*post), *coeff);
                write_trajectory_csv(table, *out);
                std::cerr << "[export] trajectory of coefficient " << *coeff << ", "
                          << table.rows.size() << " rows -> " << *out << "\n";
            });
        }
        {
            auto* env = sub->add_subcommand("envelope", "Cosine-series log envelope matrix");
            env->set_config("--config", "", "Read options from a key=value file");
            auto in = std::make_shared<std::string>();
            auto bins = std::make_shared<std::size_t>(kDefaultEnvelopeBins);
            auto excludes_c0 = std::make_shared<bool>(false);
            auto out = std::make_shared<std::string>();
            env->add_option("--in", *in, "Feature file")->required();
            env->add_option("--bins", *bins, "Frequency bins over [0, pi]")->capture_default_str();
            env->add_flag("--excludes-c0", *excludes_c0,
                          "Stored vectors start at c1; treat c0 as 0");
            env->add_option("--out", *out, "CSV output path")->required();
            env->callback([in, bins, excludes_c0, out] {
                const EnvelopeMatrix matrix =
                    mfcc_to_envelope(read_utterance(*in), *bins, !*excludes_c0);
                write_envelope_csv(matrix, *out);
                std::cerr << "[export] envelope " << matrix.rows.size() << "x" << matrix.n_bins
                          << " -> " << *out << "\n";
            });
        }
    }

    // gradcheck
    {
        auto* sub = app.add_subcommand("gradcheck",
                                       "Finite-difference check of the analytic gradients");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto net = std::make_shared<NetOpts>();
        net->dims = "2:3:2";
        auto seed = std::make_shared<std::uint64_t>(7);
        auto frames = std::make_shared<std::size_t>(5);
        auto epsilon = std::make_shared<double>(1e-5);
        auto threshold = std::make_shared<double>(1e-4);
        net->attach(sub);
        sub->add_option("--seed", *seed, "RNG seed")->capture_default_str();
        sub->add_option("--frames", *frames, "Sequence length (<= 10)")->capture_default_str();
        sub->add_option("--epsilon", *epsilon, "Central-difference step")->capture_default_str();
        sub->add_option("--threshold", *threshold, "Maximum allowed relative error")
            ->capture_default_str();
        sub->callback([net, seed, frames, epsilon, threshold, &exit_code] {
            const GradCheckReport report = gradient_check(net->spec(), *seed, *frames, *epsilon);
            char buf[40];
            for (const GradCheckReport::Entry& e : report.entries) {
                std::snprintf(buf, sizeof(buf), "%.3e", e.max_rel_err);
                std::cerr << "[gradcheck] " << e.tensor << " max rel err " << buf << "\n";
            }
            std::snprintf(buf, sizeof(buf), "%.3e", report.max_rel_err);
            if (report.passed(*threshold)) {
                std::cerr << "[gradcheck] PASS, max rel err " << buf << "\n";
            } else {
                std::cerr << "[gradcheck] FAIL, max rel err " << buf << "\n";
                exit_code = 3;
            }
        });
    }

    // pipeline
    {
        auto* sub = app.add_subcommand("pipeline",
                                       "Corpus -> align -> split -> train -> evaluate, end to end");
        sub->set_config("--config", "", "Read options from a key=value file");
        auto synth = std::make_shared<SynthOpts>();
        auto net = std::make_shared<NetOpts>();
        auto tr = std::make_shared<TrainOpts>();
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto threads = std::make_shared<int>(1);
        sub->add_option("--corpus", *manifest,
                        "Existing corpus manifest; omit to synthesize one");
        synth->attach(sub, "--data-seed");
        net->attach(sub);
        tr->attach(sub);
        sub->add_option("--out", *out, "Output directory")->required();
        sub->add_option("--threads", *threads, "Worker threads (1 = deterministic)")
            ->capture_default_str();
        sub->callback([synth, net, tr, manifest, out, threads, &exit_code] {
            kern::set_threads(*threads);
            PipelineConfig config;
            config.manifest = *manifest;
            config.shape = synth->shape();
            config.distortion = synth->distortion();
            config.network = net->spec();
            config.training = tr->config();
            config.out_dir = *out;
            const PipelineResult result = run_pipeline(config);
            if (result.diverged) {
                exit_code = 3;
            }
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const lstmpf::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const lstmpf::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const lstmpf::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const lstmpf::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
