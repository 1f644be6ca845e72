#include "lstmpf/export.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "lstmpf/errors.hpp"

namespace lstmpf {

TrajectoryTable export_trajectory(const Utterance& natural, const Utterance& hts,
                                  const Utterance& post, std::size_t coeff) {
    if (natural.size() != hts.size() || natural.size() != post.size()) {
        throw DataError("export_trajectory: frame counts differ (align first)");
    }
    if (natural.frames.empty()) {
        throw DataError("export_trajectory: empty utterances");
    }
    if (coeff >= natural.dim() || coeff >= hts.dim() || coeff >= post.dim()) {
        throw UsageError("export_trajectory: coefficient " + std::to_string(coeff) +
                         " out of range");
    }
    TrajectoryTable table;
    table.coefficient_index = coeff;
    table.rows.resize(natural.size());
    for (std::size_t t = 0; t < natural.size(); ++t) {
        TrajectoryTable::Row& r = table.rows[t];
        r.time_ms = static_cast<double>(t) * natural.frame_shift_ms;
        r.natural = natural.frames[t].mfcc[coeff];
        r.hts = hts.frames[t].mfcc[coeff];
        r.postfiltered = post.frames[t].mfcc[coeff];
    }
    return table;
}

void write_trajectory_csv(const TrajectoryTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << "time_ms,natural,hts,postfiltered\n";
    char buf[160];
    for (const TrajectoryTable::Row& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g\n", r.time_ms, r.natural, r.hts,
                      r.postfiltered);
        out << buf;
    }
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

EnvelopeMatrix mfcc_to_envelope(const Utterance& u, std::size_t n_bins, bool includes_c0) {
    if (u.frames.empty()) {
        throw DataError("mfcc_to_envelope: empty utterance");
    }
    const std::size_t dim = u.dim();
    if (n_bins < 2 || n_bins < dim) {
        throw UsageError("mfcc_to_envelope: need n_bins >= max(2, D)");
    }
    EnvelopeMatrix env;
    env.n_bins = n_bins;
    env.rows.resize(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        const std::vector<double>& c = u.frames[t].mfcc;
        Vector& row = env.rows[t];
        row.resize(n_bins);
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double w =
                std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_bins - 1);
            double v = includes_c0 ? c[0] : 0.0;
            const std::size_t d0 = includes_c0 ? 1 : 0;
            for (std::size_t d = d0; d < dim; ++d) {
                const std::size_t harmonic = includes_c0 ? d : d + 1;
                v += 2.0 * c[d] * std::cos(static_cast<double>(harmonic) * w);
            }
            row[k] = v;
        }
    }
    return env;
}

void write_envelope_csv(const EnvelopeMatrix& env, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    char buf[32];
    for (const Vector& row : env.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.12g", row[k]);
            if (k) {
                out << ',';
            }
            out << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

} // namespace lstmpf
