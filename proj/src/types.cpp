#include "lstmpf/types.hpp"

#include <cmath>
#include <unordered_set>

#include "lstmpf/errors.hpp"

namespace lstmpf {

void validate_utterance(const Utterance& u) {
    if (u.id.empty()) {
        throw DataError("utterance has empty id");
    }
    if (u.frames.empty()) {
        throw DataError("utterance '" + u.id + "' has no frames");
    }
    if (!(u.frame_shift_ms > 0.0) || !std::isfinite(u.frame_shift_ms)) {
        throw DataError("utterance '" + u.id + "' has non-positive frame shift");
    }
    const std::size_t d = u.frames.front().mfcc.size();
    for (std::size_t t = 0; t < u.frames.size(); ++t) {
        const FrameVector& f = u.frames[t];
        if (f.mfcc.size() != d) {
            throw DataError("utterance '" + u.id + "' frame " + std::to_string(t) +
                            " has mfcc dimension " + std::to_string(f.mfcc.size()) +
                            ", expected " + std::to_string(d));
        }
        if (!std::isfinite(f.f0) || !std::isfinite(f.energy)) {
            throw DataError("utterance '" + u.id + "' frame " + std::to_string(t) +
                            " has non-finite f0/energy");
        }
        if (f.f0 < 0.0) {
            throw DataError("utterance '" + u.id + "' frame " + std::to_string(t) +
                            " has negative f0");
        }
        for (double v : f.mfcc) {
            if (!std::isfinite(v)) {
                throw DataError("utterance '" + u.id + "' frame " + std::to_string(t) +
                                " has non-finite mfcc value");
            }
        }
    }
}

void validate_path(const AlignmentPath& p, std::size_t n_source, std::size_t n_target) {
    if (p.steps.empty()) {
        throw DataError("alignment path is empty");
    }
    if (n_source == 0 || n_target == 0) {
        throw DataError("alignment path over empty sequence");
    }
    const AlignmentStep& first = p.steps.front();
    const AlignmentStep& last = p.steps.back();
    if (first.source != 0 || first.target != 0) {
        throw DataError("alignment path does not start at (0,0)");
    }
    if (last.source != n_source - 1 || last.target != n_target - 1) {
        throw DataError("alignment path does not end at (N-1,M-1)");
    }
    for (std::size_t k = 1; k < p.steps.size(); ++k) {
        const std::size_t di = p.steps[k].source - p.steps[k - 1].source;
        const std::size_t dj = p.steps[k].target - p.steps[k - 1].target;
        if (p.steps[k].source < p.steps[k - 1].source || p.steps[k].target < p.steps[k - 1].target ||
            di > 1 || dj > 1 || (di == 0 && dj == 0)) {
            throw DataError("alignment path step " + std::to_string(k) + " is not monotone");
        }
    }
    for (const AlignmentStep& s : p.steps) {
        if (s.source >= n_source || s.target >= n_target) {
            throw DataError("alignment path index out of range");
        }
    }
}

void validate_corpus(const Corpus& c) {
    if (c.pairs.empty()) {
        throw DataError("corpus '" + c.name + "' has no pairs");
    }
    std::unordered_set<std::string> ids;
    for (const ParallelPair& p : c.pairs) {
        validate_utterance(p.source);
        validate_utterance(p.target);
        if (p.source.id != p.target.id) {
            throw DataError("pair utterances disagree on id: '" + p.source.id + "' vs '" +
                            p.target.id + "'");
        }
        if (!ids.insert(p.source.id).second) {
            throw DataError("duplicate pair id '" + p.source.id + "'");
        }
        if (p.source.dim() != c.dim || p.target.dim() != c.dim) {
            throw DataError("pair '" + p.source.id + "' dimension disagrees with corpus D=" +
                            std::to_string(c.dim));
        }
        if (p.already_aligned && p.source.size() != p.target.size()) {
            throw DataError("pair '" + p.source.id +
                            "' marked already-aligned but frame counts differ");
        }
        if (p.alignment) {
            validate_path(*p.alignment, p.source.size(), p.target.size());
        }
    }
}

} // namespace lstmpf
