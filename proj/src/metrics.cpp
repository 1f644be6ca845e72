#include "lstmpf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "lstmpf/errors.hpp"

namespace lstmpf {

const double kMcdAlpha = 10.0 * std::sqrt(2.0) / std::log(10.0);

McdResult mcd_rows(std::span<const Vector> target, std::span<const Vector> reference,
                   const std::vector<bool>& mask, std::size_t d_start) {
    if (target.size() != reference.size()) {
        throw DataError("mcd: frame count mismatch (" + std::to_string(target.size()) + " vs " +
                        std::to_string(reference.size()) + ")");
    }
    if (target.empty()) {
        throw DataError("mcd: empty sequences");
    }
    if (mask.size() != target.size()) {
        throw DataError("mcd: mask length " + std::to_string(mask.size()) +
                        " does not match frame count " + std::to_string(target.size()));
    }
    const std::size_t d = target.front().size();
    if (d_start >= d) {
        throw UsageError("mcd: d_start " + std::to_string(d_start) +
                         " out of range for dimension " + std::to_string(d));
    }

    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < target.size(); ++t) {
        if (mask[t]) {
            continue;
        }
        const Vector& vt = target[t];
        const Vector& vr = reference[t];
        if (vt.size() != d || vr.size() != d) {
            throw DataError("mcd: dimension mismatch at frame " + std::to_string(t));
        }
        double s = 0.0;
        for (std::size_t k = d_start; k < d; ++k) {
            const double diff = vt[k] - vr[k];
            s += diff * diff;
        }
        total += std::sqrt(s);
        ++used;
    }
    if (used == 0) {
        throw DataError("mcd: every frame is masked");
    }
    return {kMcdAlpha * total / static_cast<double>(used), used};
}

McdResult mcd(const Utterance& target, const Utterance& reference, const std::vector<bool>& mask,
              std::size_t d_start) {
    if (target.dim() != reference.dim()) {
        throw DataError("mcd: dimension mismatch (" + std::to_string(target.dim()) + " vs " +
                        std::to_string(reference.dim()) + ")");
    }
    std::vector<Vector> t_rows;
    std::vector<Vector> r_rows;
    t_rows.reserve(target.size());
    r_rows.reserve(reference.size());
    for (const FrameVector& f : target.frames) {
        t_rows.push_back(f.mfcc);
    }
    for (const FrameVector& f : reference.frames) {
        r_rows.push_back(f.mfcc);
    }
    return mcd_rows(t_rows, r_rows, mask, d_start);
}

McdReport corpus_mcd(std::span<const McdTask> tasks, std::size_t d_start) {
    if (tasks.empty()) {
        throw DataError("corpus_mcd: no utterances");
    }
    std::vector<McdReport::Entry> entries(tasks.size());
    std::vector<std::string> errors(tasks.size());

    const int nt = kern::threads();
    const long n = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (long k = 0; k < n; ++k) {
        const McdTask& task = tasks[static_cast<std::size_t>(k)];
        try {
            const McdResult r = mcd_rows(task.target, task.reference, *task.mask, d_start);
            entries[static_cast<std::size_t>(k)] = {task.id, r.mcd, r.frames_used,
                                                    task.target.size() - r.frames_used};
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(k)] = e.what();
        }
    }
    for (const std::string& e : errors) {
        if (!e.empty()) {
            throw DataError(e);
        }
    }

    McdReport report;
    report.per_utterance = std::move(entries);
    report.alpha = kMcdAlpha;
    double weighted = 0.0;
    double plain = 0.0;
    std::size_t total_frames = 0;
    for (const McdReport::Entry& e : report.per_utterance) {
        weighted += e.mcd * static_cast<double>(e.frames_used);
        plain += e.mcd;
        total_frames += e.frames_used;
    }
    report.corpus_mcd = weighted / static_cast<double>(total_frames);
    report.utterance_mean_mcd = plain / static_cast<double>(report.per_utterance.size());
    return report;
}

double improvement_percent(const McdReport& baseline, const McdReport& treated) {
    std::set<std::string> a;
    std::set<std::string> b;
    for (const McdReport::Entry& e : baseline.per_utterance) {
        a.insert(e.id);
    }
    for (const McdReport::Entry& e : treated.per_utterance) {
        b.insert(e.id);
    }
    if (a != b) {
        throw DataError("improvement: reports cover different utterance id sets");
    }
    return 100.0 * (baseline.corpus_mcd - treated.corpus_mcd) / baseline.corpus_mcd;
}

void write_mcd_csv(const McdReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };
    out << "id,mcd,frames_used,frames_excluded\n";
    std::size_t used = 0;
    std::size_t excluded = 0;
    for (const McdReport::Entry& e : report.per_utterance) {
        out << e.id << ',' << fmt(e.mcd) << ',' << e.frames_used << ',' << e.frames_excluded
            << '\n';
        used += e.frames_used;
        excluded += e.frames_excluded;
    }
    out << "TOTAL," << fmt(report.corpus_mcd) << ',' << used << ',' << excluded << '\n';
    out.flush();
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

} // namespace lstmpf
