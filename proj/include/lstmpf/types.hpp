#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace lstmpf {

// One analysis frame: f0 in Hz (0 = unvoiced), log-energy, and D
// mel-cepstral coefficients.
struct FrameVector {
    double f0 = 0.0;
    double energy = 0.0;
    std::vector<double> mfcc;

    bool operator==(const FrameVector&) const = default;
};

struct Utterance {
    std::string id;
    double frame_shift_ms = 5.0;
    std::vector<FrameVector> frames;

    std::size_t dim() const { return frames.empty() ? 0 : frames.front().mfcc.size(); }
    std::size_t size() const { return frames.size(); }

    bool operator==(const Utterance&) const = default;
};

// Throws DataError on any invariant violation: empty frames, ragged mfcc
// dimensions, non-finite values, negative f0, empty id, frame_shift <= 0.
void validate_utterance(const Utterance& u);

// One monotone step of a frame correspondence.
struct AlignmentStep {
    std::size_t source = 0;
    std::size_t target = 0;

    bool operator==(const AlignmentStep&) const = default;
};

struct AlignmentPath {
    std::vector<AlignmentStep> steps;

    bool operator==(const AlignmentPath&) const = default;
};

// Throws DataError unless the path starts at (0,0), ends at (n-1,m-1), and
// each step advances source and/or target by exactly one.
void validate_path(const AlignmentPath& p, std::size_t n_source, std::size_t n_target);

// A synthetic utterance paired with its natural counterpart. already_aligned
// asserts frame-by-frame correspondence (equal lengths); otherwise the
// alignment field carries the frame mapping once computed.
struct ParallelPair {
    Utterance source;
    Utterance target;
    bool already_aligned = false;
    std::optional<AlignmentPath> alignment;
};

struct Corpus {
    std::string name;
    std::size_t dim = 0;
    std::vector<ParallelPair> pairs;
};

// Throws DataError on dimension disagreement, duplicate pair ids, or an
// already_aligned pair with unequal frame counts.
void validate_corpus(const Corpus& c);

} // namespace lstmpf
