#include "lstmpf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lstmpf/alignment.hpp"
#include "lstmpf/errors.hpp"
#include "lstmpf/rng.hpp"

namespace lstmpf {

void validate_config(const TrainingConfig& config) {
    if (config.epochs == 0) {
        throw UsageError("epochs must be positive");
    }
    // 0 is admitted so a no-op optimizer stays expressible.
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
        throw UsageError("learning rate must be a non-negative finite real");
    }
    if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
        throw UsageError("momentum must lie in [0, 1)");
    }
    if (config.grad_clip && !(*config.grad_clip > 0.0)) {
        throw UsageError("gradient clip must be positive when set");
    }
    double sum = 0.0;
    for (double r : config.split) {
        if (!(r > 0.0 && r < 1.0)) {
            throw UsageError("split ratios must lie in (0, 1)");
        }
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw UsageError("split ratios must sum to 1");
    }
    if (config.eval_every == 0) {
        throw UsageError("eval-every must be positive");
    }
    if (config.patience && *config.patience == 0) {
        throw UsageError("patience must be positive when set");
    }
    if (config.silence_percentile < 0.0 || config.silence_percentile > 100.0) {
        throw UsageError("silence percentile must lie in [0, 100]");
    }
}

SplitCorpus split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed) {
    for (double r : ratios) {
        if (!(r > 0.0 && r < 1.0)) {
            throw UsageError("split ratios must lie in (0, 1)");
        }
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw UsageError("split ratios must sum to 1");
    }
    if (corpus.pairs.size() < 3) {
        throw DataError("corpus '" + corpus.name + "' has fewer than 3 pairs, cannot split");
    }

    std::vector<std::size_t> order(corpus.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    double total = 0.0;
    for (const ParallelPair& p : corpus.pairs) {
        total += static_cast<double>(p.source.size());
    }
    const double train_target = ratios[0] * total;
    const double val_target = (ratios[0] + ratios[1]) * total;

    SplitCorpus split;
    double acc = 0.0;
    for (std::size_t idx : order) {
        const ParallelPair& p = corpus.pairs[idx];
        if (acc < train_target) {
            split.train.push_back(p);
        } else if (acc < val_target) {
            split.validation.push_back(p);
        } else {
            split.test.push_back(p);
        }
        acc += static_cast<double>(p.source.size());
    }
    if (split.train.empty() || split.validation.empty() || split.test.empty()) {
        throw DataError("corpus '" + corpus.name + "' too small to populate all three buckets");
    }
    return split;
}

SequenceLoss sequence_loss(std::span<const Vector> ys, std::span<const Vector> ts) {
    if (ys.size() != ts.size()) {
        throw DataError("sequence_loss: length mismatch");
    }
    SequenceLoss out;
    out.dys.resize(ys.size());
    for (std::size_t t = 0; t < ys.size(); ++t) {
        if (ys[t].size() != ts[t].size()) {
            throw DataError("sequence_loss: dimension mismatch at frame " + std::to_string(t));
        }
        Vector& dy = out.dys[t];
        dy.resize(ys[t].size());
        for (std::size_t d = 0; d < dy.size(); ++d) {
            dy[d] = ys[t][d] - ts[t][d];
            out.loss += 0.5 * dy[d] * dy[d];
        }
    }
    return out;
}

void write_epoch_csv(std::span<const EpochRecord> records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << "epoch,train_loss,validation_mcd,wall_time_s\n";
    char buf[128];
    for (const EpochRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g\n", r.epoch, r.train_loss,
                      r.validation_mcd, r.wall_time_s);
        out << buf;
    }
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

PreparedPair prepare_pair(const ParallelPair& pair) {
    PreparedPair prep;
    prep.id = pair.source.id;
    FramePairs fp = collapse_to_pairs(pair);
    prep.inputs = std::move(fp.inputs);
    prep.targets = std::move(fp.targets);
    prep.reference = aligned_target_frames(pair);
    return prep;
}

std::vector<PreparedPair> prepare_pairs(std::span<const ParallelPair> pairs) {
    std::vector<PreparedPair> out;
    out.reserve(pairs.size());
    for (const ParallelPair& p : pairs) {
        out.push_back(prepare_pair(p));
    }
    return out;
}

namespace {

void accumulate_stats(const std::vector<const std::vector<Vector>*>& rows_per_pair, Vector& mean,
                      Vector& sd, double sd_floor) {
    const std::size_t dim = mean.size();
    double count = 0.0;
    for (const auto* rows : rows_per_pair) {
        for (const Vector& row : *rows) {
            for (std::size_t d = 0; d < dim; ++d) {
                mean[d] += row[d];
            }
            count += 1.0;
        }
    }
    for (std::size_t d = 0; d < dim; ++d) {
        mean[d] /= count;
    }
    for (const auto* rows : rows_per_pair) {
        for (const Vector& row : *rows) {
            for (std::size_t d = 0; d < dim; ++d) {
                const double delta = row[d] - mean[d];
                sd[d] += delta * delta;
            }
        }
    }
    for (std::size_t d = 0; d < dim; ++d) {
        sd[d] = std::sqrt(sd[d] / count);
        if (sd[d] <= sd_floor) {
            sd[d] = 1.0;
        }
    }
}

std::vector<Vector> normalize_rows(const std::vector<Vector>& rows, const Vector& mean,
                                   const Vector& sd) {
    std::vector<Vector> out(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        Vector& r = out[t];
        r.resize(rows[t].size());
        for (std::size_t d = 0; d < r.size(); ++d) {
            r[d] = (rows[t][d] - mean[d]) / sd[d];
        }
    }
    return out;
}

Vector denormalize_row(const Vector& row, const Vector& mean, const Vector& sd) {
    Vector out(row.size());
    for (std::size_t d = 0; d < row.size(); ++d) {
        out[d] = row[d] * sd[d] + mean[d];
    }
    return out;
}

std::vector<std::vector<double>*> tensor_list(NetworkParams& p) {
    std::vector<std::vector<double>*> out;
    for_each_tensor(p, [&out](const std::string&, std::vector<double>& v) { out.push_back(&v); });
    return out;
}

std::vector<std::vector<double>*> tensor_list(Gradients& g) {
    std::vector<std::vector<double>*> out;
    for_each_tensor(g, [&out](const std::string&, std::vector<double>& v) { out.push_back(&v); });
    return out;
}

double global_norm(Gradients& g) {
    double sq = 0.0;
    for_each_tensor(g, [&sq](const std::string&, const std::vector<double>& v) {
        for (double x : v) {
            sq += x * x;
        }
    });
    return std::sqrt(sq);
}

} // namespace

Normalization fit_normalization(std::span<const PreparedPair> train, double sd_floor) {
    if (train.empty()) {
        throw DataError("fit_normalization: empty training bucket");
    }
    const std::size_t dim = train.front().inputs.front().size();
    Normalization norm;
    norm.in_mean.assign(dim, 0.0);
    norm.in_sd.assign(dim, 0.0);
    norm.out_mean.assign(dim, 0.0);
    norm.out_sd.assign(dim, 0.0);

    std::vector<const std::vector<Vector>*> ins, outs;
    for (const PreparedPair& p : train) {
        ins.push_back(&p.inputs);
        outs.push_back(&p.targets);
    }
    accumulate_stats(ins, norm.in_mean, norm.in_sd, sd_floor);
    accumulate_stats(outs, norm.out_mean, norm.out_sd, sd_floor);
    return norm;
}

TrainResult train(const SplitCorpus& split, const NetworkSpec& spec,
                  const TrainingConfig& config) {
    validate_config(config);
    if (split.train.empty() || split.validation.empty()) {
        throw DataError("train: training and validation buckets must be non-empty");
    }

    const std::vector<PreparedPair> train_pairs = prepare_pairs(split.train);
    const std::vector<PreparedPair> val_pairs = prepare_pairs(split.validation);

    const std::size_t dim = train_pairs.front().inputs.front().size();
    if (spec.dims.input != dim || spec.dims.output != dim) {
        throw DataError("train: network input/output sizes must equal the corpus dimension " +
                        std::to_string(dim));
    }

    const Normalization norm = fit_normalization(train_pairs);

    std::vector<std::vector<Vector>> train_x, train_t;
    for (const PreparedPair& p : train_pairs) {
        train_x.push_back(normalize_rows(p.inputs, norm.in_mean, norm.in_sd));
        train_t.push_back(normalize_rows(p.targets, norm.out_mean, norm.out_sd));
    }
    std::vector<std::vector<Vector>> val_x;
    std::vector<std::vector<bool>> val_masks;
    for (const PreparedPair& p : val_pairs) {
        val_x.push_back(normalize_rows(p.inputs, norm.in_mean, norm.in_sd));
        val_masks.push_back(silence_mask(p.reference, config.silence_percentile));
    }

    NetworkParams params = init_params(spec, config.seed);
    Gradients velocity = zero_gradients(params);
    const auto param_tensors = tensor_list(params);
    const auto velocity_tensors = tensor_list(velocity);

    auto validate_mcd = [&](const NetworkParams& net) {
        std::vector<std::vector<Vector>> outputs(val_pairs.size());
        for (std::size_t u = 0; u < val_pairs.size(); ++u) {
            const ForwardResult fwd = forward(net, val_x[u]);
            outputs[u].reserve(fwd.ys.size());
            for (const Vector& y : fwd.ys) {
                outputs[u].push_back(denormalize_row(y, norm.out_mean, norm.out_sd));
            }
        }
        std::vector<McdTask> tasks(val_pairs.size());
        for (std::size_t u = 0; u < val_pairs.size(); ++u) {
            tasks[u] = McdTask{val_pairs[u].id, outputs[u], val_pairs[u].targets, &val_masks[u]};
        }
        return corpus_mcd(tasks, config.mcd_d_start).corpus_mcd;
    };

    const auto start = std::chrono::steady_clock::now();
    auto elapsed_s = [&start] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    TrainResult result;
    result.norm = norm;

    // Initial evaluation: the untouched network is selection candidate 0.
    {
        double loss0 = 0.0;
        for (std::size_t u = 0; u < train_x.size(); ++u) {
            const ForwardResult fwd = forward(params, train_x[u]);
            loss0 += sequence_loss(fwd.ys, train_t[u]).loss;
        }
        const double mcd0 = validate_mcd(params);
        result.records.push_back(
            EpochRecord{0, loss0 / static_cast<double>(train_x.size()), mcd0, elapsed_s()});
        result.params = params;
        result.best_validation_mcd = mcd0;
        result.best_epoch = 0;
    }

    Rng shuffle_rng(derive_seed(config.seed, 0x73687566ULL));
    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t evals_without_improvement = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        bool finite = true;
        for (std::size_t idx : order) {
            try {
                const ForwardResult fwd = forward(params, train_x[idx]);
                SequenceLoss sl = sequence_loss(fwd.ys, train_t[idx]);
                if (!std::isfinite(sl.loss)) {
                    finite = false;
                    break;
                }
                epoch_loss += sl.loss;
                Gradients grads = backward(params, fwd.cache, sl.dys);
                if (config.grad_clip) {
                    const double norm_g = global_norm(grads);
                    if (norm_g > *config.grad_clip) {
                        const double scale = *config.grad_clip / norm_g;
                        for_each_tensor(grads,
                                        [scale](const std::string&, std::vector<double>& v) {
                                            for (double& x : v) {
                                                x *= scale;
                                            }
                                        });
                    }
                }
                const auto grad_tensors = tensor_list(grads);
                for (std::size_t k = 0; k < param_tensors.size(); ++k) {
                    std::vector<double>& theta = *param_tensors[k];
                    std::vector<double>& vel = *velocity_tensors[k];
                    const std::vector<double>& g = *grad_tensors[k];
                    for (std::size_t e = 0; e < theta.size(); ++e) {
                        vel[e] = config.momentum * vel[e] - config.learning_rate * g[e];
                        theta[e] += vel[e];
                    }
                }
            } catch (const DataError&) {
                // Non-finite activations surface here; the run is lost but
                // the best evaluated parameters are not.
                finite = false;
                break;
            }
        }
        if (!finite) {
            result.diverged = true;
            break;
        }
        if (epoch % config.eval_every != 0) {
            continue;
        }
        const double val = validate_mcd(params);
        result.records.push_back(EpochRecord{
            epoch, epoch_loss / static_cast<double>(train_x.size()), val, elapsed_s()});
        if (val < result.best_validation_mcd) {
            result.best_validation_mcd = val;
            result.best_epoch = epoch;
            result.params = params;
            evals_without_improvement = 0;
        } else {
            ++evals_without_improvement;
            if (config.patience && evals_without_improvement >= *config.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }
    return result;
}

Utterance postfilter_apply(const NetworkParams& params, const Normalization& norm,
                           const Utterance& u) {
    if (u.frames.empty()) {
        throw DataError("postfilter_apply: empty utterance '" + u.id + "'");
    }
    if (u.dim() != params.dims.input || params.dims.input != params.dims.output) {
        throw DataError("postfilter_apply: utterance dimension " + std::to_string(u.dim()) +
                        " does not match network " + std::to_string(params.dims.input));
    }
    std::vector<Vector> xs(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        xs[t].resize(u.dim());
        for (std::size_t d = 0; d < u.dim(); ++d) {
            xs[t][d] = (u.frames[t].mfcc[d] - norm.in_mean[d]) / norm.in_sd[d];
        }
    }
    const ForwardResult fwd = forward(params, xs);
    Utterance out = u;
    for (std::size_t t = 0; t < u.size(); ++t) {
        out.frames[t].mfcc = denormalize_row(fwd.ys[t], norm.out_mean, norm.out_sd);
    }
    return out;
}

GradCheckReport gradient_check(const NetworkSpec& spec, std::uint64_t seed, std::size_t seq_len,
                               double epsilon) {
    const auto too_big = [](std::size_t n) { return n > 8; };
    if (too_big(spec.dims.input) || too_big(spec.dims.output) ||
        std::any_of(spec.dims.hidden.begin(), spec.dims.hidden.end(), too_big)) {
        throw UsageError("gradient_check: every dimension must be <= 8");
    }
    if (seq_len == 0 || seq_len > 10) {
        throw UsageError("gradient_check: sequence length must lie in [1, 10]");
    }
    if (!(epsilon > 0.0)) {
        throw UsageError("gradient_check: epsilon must be positive");
    }

    NetworkParams params = init_params(spec, seed);
    Rng xs_rng(derive_seed(seed, 1));
    Rng ts_rng(derive_seed(seed, 2));
    std::vector<Vector> xs(seq_len, Vector(spec.dims.input));
    std::vector<Vector> ts(seq_len, Vector(spec.dims.output));
    for (Vector& x : xs) {
        for (double& v : x) {
            v = xs_rng.gauss();
        }
    }
    for (Vector& t : ts) {
        for (double& v : t) {
            v = ts_rng.gauss();
        }
    }

    const ForwardResult fwd = forward(params, xs);
    const SequenceLoss sl = sequence_loss(fwd.ys, ts);
    const Gradients analytic = backward(params, fwd.cache, sl.dys);

    std::vector<const std::vector<double>*> grad_tensors;
    std::vector<std::string> names;
    for_each_tensor(analytic, [&](const std::string& name, const std::vector<double>& v) {
        grad_tensors.push_back(&v);
        names.push_back(name);
    });
    const auto param_tensors = tensor_list(params);

    auto loss_at = [&params, &xs, &ts]() {
        const ForwardResult f = forward(params, xs);
        return sequence_loss(f.ys, ts).loss;
    };

    GradCheckReport report;
    for (std::size_t k = 0; k < param_tensors.size(); ++k) {
        std::vector<double>& theta = *param_tensors[k];
        const std::vector<double>& g = *grad_tensors[k];
        double worst = 0.0;
        for (std::size_t e = 0; e < theta.size(); ++e) {
            const double saved = theta[e];
            theta[e] = saved + epsilon;
            const double plus = loss_at();
            theta[e] = saved - epsilon;
            const double minus = loss_at();
            theta[e] = saved;
            const double fd = (plus - minus) / (2.0 * epsilon);
            const double rel =
                std::abs(g[e] - fd) / std::max(std::abs(g[e]) + std::abs(fd), 1e-8);
            worst = std::max(worst, rel);
        }
        report.entries.push_back({names[k], worst});
        report.max_rel_err = std::max(report.max_rel_err, worst);
    }
    return report;
}

} // namespace lstmpf
