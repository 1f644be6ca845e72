#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lstmpf/kernels.hpp"
#include "lstmpf/types.hpp"

namespace lstmpf {

struct AlignResult {
    AlignmentPath path;
    double cost = 0.0;
};

// Dynamic time warping over mfcc vectors (f0 and energy excluded), steps
// {(1,0),(0,1),(1,1)}, per-cell cost = Euclidean distance. Exact, no bands.
// Backtracking ties prefer the diagonal, then the source-advance step.
AlignResult dtw_align(const Utterance& source, const Utterance& target);

// Sum of per-cell Euclidean mfcc distances along a path.
double path_cost(const Utterance& source, const Utterance& target, const AlignmentPath& path);

// One (input, target) mfcc pair per source frame, in source order. The
// target of source frame i is the mfcc of the first target frame matched to
// i by the alignment. Already-aligned pairs (or missing alignment with equal
// lengths) map identically; missing alignment with unequal lengths throws.
struct FramePairs {
    std::vector<Vector> inputs;  // source mfcc rows
    std::vector<Vector> targets; // matched target mfcc rows
};
FramePairs collapse_to_pairs(const ParallelPair& pair);

// Full target frame (f0, energy, mfcc) matched to each source frame, under
// the same first-match rule. Length equals the source frame count.
std::vector<FrameVector> aligned_target_frames(const ParallelPair& pair);

// One `i <tab> j` line per step.
void write_alignment_text(const AlignmentPath& path, const std::string& out_path);

} // namespace lstmpf
