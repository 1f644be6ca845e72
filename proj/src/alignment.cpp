#include "lstmpf/alignment.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "lstmpf/errors.hpp"

namespace lstmpf {

namespace {

double mfcc_distance(const FrameVector& a, const FrameVector& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.mfcc.size(); ++k) {
        const double d = a.mfcc[k] - b.mfcc[k];
        s += d * d;
    }
    return std::sqrt(s);
}

// First target index matched to each source index, in path order.
std::vector<std::size_t> first_match(const AlignmentPath& path, std::size_t n_source) {
    std::vector<std::size_t> match(n_source, std::numeric_limits<std::size_t>::max());
    for (const AlignmentStep& s : path.steps) {
        if (match[s.source] == std::numeric_limits<std::size_t>::max()) {
            match[s.source] = s.target;
        }
    }
    return match;
}

// Resolves the pair's frame mapping: explicit path, identity for
// already-aligned or equal-length pairs, error otherwise.
std::vector<std::size_t> target_index_per_source(const ParallelPair& pair) {
    const std::size_t n = pair.source.size();
    const std::size_t m = pair.target.size();
    if (pair.alignment) {
        validate_path(*pair.alignment, n, m);
        return first_match(*pair.alignment, n);
    }
    if (pair.already_aligned || n == m) {
        std::vector<std::size_t> identity(n);
        for (std::size_t t = 0; t < n; ++t) {
            identity[t] = t;
        }
        return identity;
    }
    throw DataError("pair '" + pair.source.id +
                    "' has no alignment and frame counts differ (" + std::to_string(n) + " vs " +
                    std::to_string(m) + ")");
}

} // namespace

AlignResult dtw_align(const Utterance& source, const Utterance& target) {
    validate_utterance(source);
    validate_utterance(target);
    if (source.dim() != target.dim()) {
        throw DataError("dtw_align: dimension mismatch (" + std::to_string(source.dim()) +
                        " vs " + std::to_string(target.dim()) + ")");
    }
    const std::size_t n = source.size();
    const std::size_t m = target.size();

    Matrix acc(n, m);
    acc(0, 0) = mfcc_distance(source.frames[0], target.frames[0]);
    for (std::size_t i = 1; i < n; ++i) {
        acc(i, 0) = acc(i - 1, 0) + mfcc_distance(source.frames[i], target.frames[0]);
    }
    for (std::size_t j = 1; j < m; ++j) {
        acc(0, j) = acc(0, j - 1) + mfcc_distance(source.frames[0], target.frames[j]);
    }
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 1; j < m; ++j) {
            const double best =
                std::min(acc(i - 1, j - 1), std::min(acc(i - 1, j), acc(i, j - 1)));
            acc(i, j) = best + mfcc_distance(source.frames[i], target.frames[j]);
        }
    }

    // Backtrack; ties prefer diagonal, then source-advance.
    std::vector<AlignmentStep> rev;
    std::size_t i = n - 1;
    std::size_t j = m - 1;
    rev.push_back({i, j});
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = acc(i - 1, j - 1);
            const double up = acc(i - 1, j);
            const double left = acc(i, j - 1);
            const double best = std::min(diag, std::min(up, left));
            if (diag == best) {
                --i;
                --j;
            } else if (up == best) {
                --i;
            } else {
                --j;
            }
        }
        rev.push_back({i, j});
    }

    AlignResult result;
    result.cost = acc(n - 1, m - 1);
    result.path.steps.assign(rev.rbegin(), rev.rend());
    validate_path(result.path, n, m);
    return result;
}

double path_cost(const Utterance& source, const Utterance& target, const AlignmentPath& path) {
    validate_path(path, source.size(), target.size());
    double s = 0.0;
    for (const AlignmentStep& step : path.steps) {
        s += mfcc_distance(source.frames[step.source], target.frames[step.target]);
    }
    return s;
}

FramePairs collapse_to_pairs(const ParallelPair& pair) {
    const std::vector<std::size_t> match = target_index_per_source(pair);
    FramePairs out;
    out.inputs.reserve(match.size());
    out.targets.reserve(match.size());
    for (std::size_t i = 0; i < match.size(); ++i) {
        out.inputs.push_back(pair.source.frames[i].mfcc);
        out.targets.push_back(pair.target.frames[match[i]].mfcc);
    }
    return out;
}

std::vector<FrameVector> aligned_target_frames(const ParallelPair& pair) {
    const std::vector<std::size_t> match = target_index_per_source(pair);
    std::vector<FrameVector> out;
    out.reserve(match.size());
    for (std::size_t i = 0; i < match.size(); ++i) {
        out.push_back(pair.target.frames[match[i]]);
    }
    return out;
}

void write_alignment_text(const AlignmentPath& path, const std::string& out_path) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + out_path + "' for writing");
    }
    for (const AlignmentStep& s : path.steps) {
        out << s.source << '\t' << s.target << '\n';
    }
    out.flush();
    if (!out) {
        throw FormatError("write failure on '" + out_path + "'");
    }
}

} // namespace lstmpf
