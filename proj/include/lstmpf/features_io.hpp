#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lstmpf/types.hpp"

namespace lstmpf {

// Binary feature file, little-endian:
//   magic "CFT1" | u32 version=1 | u32 D | u32 frame_count | f32 frame_shift_ms
//   | u32 id_length | id bytes (UTF-8)
//   | frame_count records of (f32 f0, f32 energy, D x f32 mfcc)
//
// Values are stored as f32; in memory everything is double. Writing is
// canonical: equal utterances produce identical bytes.

std::string encode_utterance(const Utterance& u);
Utterance decode_utterance(std::string_view bytes, const std::string& context);

Utterance read_utterance(const std::string& path);
void write_utterance(const Utterance& u, const std::string& path);

// Nearest-rank percentile of the given values: rank = ceil(p/100 * N),
// clamped to [1, N]; p <= 0 selects the minimum.
double energy_percentile_threshold(std::vector<double> energies, double percentile);

// mask[t] = true marks frame t silent: f0 == 0 AND energy strictly below the
// nearest-rank percentile of this utterance's energies. Throws DataError if
// every frame ends up masked.
std::vector<bool> silence_mask(std::span<const FrameVector> frames, double energy_percentile);
std::vector<bool> silence_mask(const Utterance& u, double energy_percentile);

inline constexpr double kDefaultSilencePercentile = 10.0;

// Corpus manifest: one line per pair, `pair_id <tab> source_path <tab> target_path`.
// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
    std::string id;
    std::string source_path;
    std::string target_path;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(std::span<const ManifestEntry> entries, const std::string& path);

// Reads every pair named by the manifest. Pairs are not marked aligned.
Corpus load_corpus(const std::string& manifest_path, const std::string& name = "corpus");

// Writes each pair to `<dir>/<id>_src.cft` / `<dir>/<id>_tgt.cft` plus
// `<dir>/manifest.tsv`; returns the manifest path.
std::string store_corpus(const Corpus& corpus, const std::string& dir);

} // namespace lstmpf
