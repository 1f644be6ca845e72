#include "lstmpf/features_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "lstmpf/errors.hpp"

namespace lstmpf {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

// Bounds-checked little-endian reader.
class Reader {
public:
    Reader(std::string_view bytes, const std::string& context) : bytes_(bytes), ctx_(context) {}

    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int k = 3; k >= 0; --k) {
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(k)]);
        }
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string_view raw(std::size_t n, const char* what) {
        need(n, what);
        std::string_view v = bytes_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw CorruptionError(ctx_ + ": truncated file while reading " + what);
        }
    }

    std::string_view bytes_;
    std::string ctx_;
    std::size_t pos_ = 0;
};

float to_f32_checked(double v, const std::string& ctx, std::size_t frame, const char* field) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) {
        throw DataError(ctx + ": frame " + std::to_string(frame) + " " + field +
                        " is not representable as a finite 32-bit float");
    }
    return f;
}

} // namespace

std::string encode_utterance(const Utterance& u) {
    validate_utterance(u);
    const std::string ctx = "utterance '" + u.id + "'";
    const std::size_t d = u.dim();

    std::string out;
    out.reserve(4 + 4 * 4 + 4 + u.id.size() + u.size() * (2 + d) * 4);
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(d));
    put_u32(out, static_cast<std::uint32_t>(u.size()));
    put_f32(out, to_f32_checked(u.frame_shift_ms, ctx, 0, "frame_shift_ms"));
    put_u32(out, static_cast<std::uint32_t>(u.id.size()));
    out.append(u.id);
    for (std::size_t t = 0; t < u.size(); ++t) {
        const FrameVector& f = u.frames[t];
        put_f32(out, to_f32_checked(f.f0, ctx, t, "f0"));
        put_f32(out, to_f32_checked(f.energy, ctx, t, "energy"));
        for (double v : f.mfcc) {
            put_f32(out, to_f32_checked(v, ctx, t, "mfcc"));
        }
    }
    return out;
}

Utterance decode_utterance(std::string_view bytes, const std::string& context) {
    Reader r(bytes, context);

    const std::string_view magic = r.raw(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kMagic)) {
        throw FormatError(context + ": bad magic, not a feature file");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError(context + ": unsupported feature file version " +
                          std::to_string(version));
    }
    const std::uint32_t d = r.u32();
    const std::uint32_t frame_count = r.u32();
    const float frame_shift = r.f32();
    const std::uint32_t id_len = r.u32();
    if (id_len > r.remaining()) {
        throw CorruptionError(context + ": id length exceeds file size");
    }
    Utterance u;
    u.id = std::string(r.raw(id_len, "id"));
    u.frame_shift_ms = static_cast<double>(frame_shift);

    // Header vs payload consistency before touching the records.
    const std::size_t record_bytes = (2 + static_cast<std::size_t>(d)) * 4;
    if (r.remaining() != static_cast<std::size_t>(frame_count) * record_bytes) {
        throw CorruptionError(context + ": payload holds " + std::to_string(r.remaining()) +
                              " bytes, header implies " +
                              std::to_string(static_cast<std::size_t>(frame_count) * record_bytes));
    }

    u.frames.resize(frame_count);
    for (std::uint32_t t = 0; t < frame_count; ++t) {
        FrameVector& f = u.frames[t];
        f.f0 = static_cast<double>(r.f32());
        f.energy = static_cast<double>(r.f32());
        f.mfcc.resize(d);
        for (std::uint32_t k = 0; k < d; ++k) {
            f.mfcc[k] = static_cast<double>(r.f32());
        }
        if (!std::isfinite(f.f0) || !std::isfinite(f.energy) ||
            std::any_of(f.mfcc.begin(), f.mfcc.end(), [](double v) { return !std::isfinite(v); })) {
            throw DataError(context + ": non-finite value in frame " + std::to_string(t));
        }
    }
    validate_utterance(u);
    return u;
}

Utterance read_utterance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open feature file '" + path + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw FormatError("read failure on '" + path + "'");
    }
    return decode_utterance(bytes, "'" + path + "'");
}

void write_utterance(const Utterance& u, const std::string& path) {
    const std::string bytes = encode_utterance(u);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

double energy_percentile_threshold(std::vector<double> energies, double percentile) {
    if (energies.empty()) {
        throw DataError("percentile of empty energy sequence");
    }
    std::sort(energies.begin(), energies.end());
    if (percentile <= 0.0) {
        return energies.front();
    }
    const double n = static_cast<double>(energies.size());
    std::size_t rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, energies.size());
    return energies[rank - 1];
}

std::vector<bool> silence_mask(std::span<const FrameVector> frames, double energy_percentile) {
    if (frames.empty()) {
        throw DataError("silence_mask of empty frame sequence");
    }
    if (energy_percentile < 0.0 || energy_percentile > 100.0) {
        throw UsageError("energy percentile must lie in [0,100]");
    }
    std::vector<double> energies;
    energies.reserve(frames.size());
    for (const FrameVector& f : frames) {
        energies.push_back(f.energy);
    }
    const double threshold = energy_percentile_threshold(std::move(energies), energy_percentile);

    std::vector<bool> mask(frames.size());
    bool any_voiced = false;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const bool silent = frames[t].f0 == 0.0 && frames[t].energy < threshold;
        mask[t] = silent;
        any_voiced = any_voiced || !silent;
    }
    if (!any_voiced) {
        throw DataError("all frames are silent; no voiced frames to evaluate");
    }
    return mask;
}

std::vector<bool> silence_mask(const Utterance& u, double energy_percentile) {
    validate_utterance(u);
    return silence_mask(std::span<const FrameVector>(u.frames), energy_percentile);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open manifest '" + path + "'");
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&base](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::size_t t1 = line.find('\t');
        const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos) {
            throw FormatError("manifest '" + path + "' line " + std::to_string(lineno) +
                              ": expected `id<TAB>source<TAB>target`");
        }
        ManifestEntry e;
        e.id = line.substr(0, t1);
        e.source_path = resolve(line.substr(t1 + 1, t2 - t1 - 1));
        e.target_path = resolve(line.substr(t2 + 1));
        if (e.id.empty() || e.source_path.empty() || e.target_path.empty()) {
            throw FormatError("manifest '" + path + "' line " + std::to_string(lineno) +
                              ": empty field");
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) {
        throw FormatError("manifest '" + path + "' lists no pairs");
    }
    return entries;
}

void write_manifest(std::span<const ManifestEntry> entries, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    for (const ManifestEntry& e : entries) {
        out << e.id << '\t' << e.source_path << '\t' << e.target_path << '\n';
    }
    out.flush();
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

Corpus load_corpus(const std::string& manifest_path, const std::string& name) {
    const std::vector<ManifestEntry> entries = read_manifest(manifest_path);
    Corpus corpus;
    corpus.name = name;
    for (const ManifestEntry& e : entries) {
        ParallelPair pair;
        pair.source = read_utterance(e.source_path);
        pair.target = read_utterance(e.target_path);
        pair.source.id = e.id;
        pair.target.id = e.id;
        corpus.pairs.push_back(std::move(pair));
    }
    corpus.dim = corpus.pairs.front().source.dim();
    validate_corpus(corpus);
    return corpus;
}

std::string store_corpus(const Corpus& corpus, const std::string& dir) {
    validate_corpus(corpus);
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    std::vector<ManifestEntry> entries;
    for (const ParallelPair& p : corpus.pairs) {
        ManifestEntry e;
        e.id = p.source.id;
        e.source_path = (base / (e.id + "_src.cft")).string();
        e.target_path = (base / (e.id + "_tgt.cft")).string();
        write_utterance(p.source, e.source_path);
        write_utterance(p.target, e.target_path);
        // Manifest carries basenames so the corpus directory is relocatable.
        e.source_path = e.id + "_src.cft";
        e.target_path = e.id + "_tgt.cft";
        entries.push_back(std::move(e));
    }
    const std::string manifest = (base / "manifest.tsv").string();
    write_manifest(entries, manifest);
    return manifest;
}

} // namespace lstmpf
