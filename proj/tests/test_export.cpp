#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "lstmpf/errors.hpp"
#include "lstmpf/export.hpp"
#include "lstmpf/rng.hpp"
#include "test_util.hpp"

using namespace lstmpf;
using testutil::TempDir;
using testutil::frame;
using testutil::utt;

namespace {

constexpr double kPi = 3.14159265358979323846;

Utterance coeff_utt(const std::string& id, const std::vector<Vector>& rows,
                    double shift = 5.0) {
    Utterance u;
    u.id = id;
    u.frame_shift_ms = shift;
    for (const auto& r : rows) {
        u.frames.push_back(frame(100.0, 1.0, r));
    }
    return u;
}

std::vector<std::vector<double>> parse_csv(const std::string& path, bool skip_header) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

TEST_CASE("trajectory extraction") {
    const Utterance nat = coeff_utt("n", {{0.0, 1.0, 9.0}, {0.0, 2.0, 9.0}}, 5.0);
    const Utterance hts = coeff_utt("h", {{0.0, 3.0, 9.0}, {0.0, 4.0, 9.0}}, 5.0);
    const Utterance post = coeff_utt("p", {{0.0, 5.0, 9.0}, {0.0, 6.0, 9.0}}, 5.0);
    const TrajectoryTable t = export_trajectory(nat, hts, post, 1);
    CHECK(t.coefficient_index == 1);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].time_ms == 0.0);
    CHECK(t.rows[1].time_ms == 5.0);
    CHECK(t.rows[0].natural == 1.0);
    CHECK(t.rows[0].hts == 3.0);
    CHECK(t.rows[0].postfiltered == 5.0);
    CHECK(t.rows[1].natural == 2.0);
    CHECK(t.rows[1].hts == 4.0);
    CHECK(t.rows[1].postfiltered == 6.0);
}

TEST_CASE("identical utterances give three equal columns") {
    Rng rng(5);
    std::vector<Vector> rows(6, Vector(3));
    for (auto& r : rows) {
        for (auto& v : r) {
            v = rng.uniform(-1.0, 1.0);
        }
    }
    const Utterance u = coeff_utt("u", rows);
    const TrajectoryTable t = export_trajectory(u, u, u, 2);
    for (const auto& r : t.rows) {
        CHECK(r.natural == r.hts);
        CHECK(r.hts == r.postfiltered);
    }
}

TEST_CASE("trajectory errors") {
    const Utterance a = coeff_utt("a", {{0.0, 1.0}});
    const Utterance b = coeff_utt("b", {{0.0, 1.0}, {0.0, 2.0}});
    CHECK_THROWS_AS(export_trajectory(a, b, a, 0), DataError);
    CHECK_THROWS_AS(export_trajectory(a, a, a, 2), UsageError);
}

TEST_CASE("trajectory csv round trip") {
    TempDir tmp("traj");
    const Utterance nat = coeff_utt("n", {{0.25, -1.0}, {0.5, 2.0}, {0.125, 0.0}});
    const TrajectoryTable t = export_trajectory(nat, nat, nat, 0);
    const std::string path = tmp.file("t.csv");
    write_trajectory_csv(t, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "time_ms,natural,hts,postfiltered");
    in.close();
    const auto rows = parse_csv(path, true);
    REQUIRE(rows.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(rows[k].size() == 4);
        CHECK(rows[k][0] == doctest::Approx(t.rows[k].time_ms).epsilon(1e-9));
        CHECK(rows[k][1] == doctest::Approx(t.rows[k].natural).epsilon(1e-9));
    }
}

TEST_CASE("zero cepstrum maps to a zero envelope") {
    const Utterance u = coeff_utt("z", {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
    const EnvelopeMatrix env = mfcc_to_envelope(u, 16);
    CHECK(env.n_bins == 16);
    REQUIRE(env.rows.size() == 2);
    for (const auto& row : env.rows) {
        REQUIRE(row.size() == 16);
        for (double v : row) {
            CHECK(v == 0.0);
        }
    }
}

TEST_CASE("single c1 coefficient gives 2cos(w)") {
    // c = (0, 1, 0): env(w) = 2 cos(w), so 2 at w=0 and -2 at w=pi.
    const Utterance u = coeff_utt("c1", {{0.0, 1.0, 0.0}});
    const std::size_t bins = 9;
    const EnvelopeMatrix env = mfcc_to_envelope(u, bins);
    REQUIRE(env.rows.size() == 1);
    const Vector& row = env.rows[0];
    CHECK(row.front() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(row.back() == doctest::Approx(-2.0).epsilon(1e-12));
    for (std::size_t k = 0; k < bins; ++k) {
        const double w = kPi * static_cast<double>(k) / static_cast<double>(bins - 1);
        CHECK(row[k] == doctest::Approx(2.0 * std::cos(w)).epsilon(1e-12));
    }
}

TEST_CASE("c0 shifts the envelope uniformly") {
    const Utterance u = coeff_utt("c0", {{3.0, 0.0}});
    const EnvelopeMatrix env = mfcc_to_envelope(u, 8);
    for (double v : env.rows[0]) {
        CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("excluding c0 shifts harmonics up by one") {
    // Stored vector (1, 0) read as (c1, c2): env(w) = 2 cos(w).
    const Utterance u = coeff_utt("nc0", {{1.0, 0.0}});
    const std::size_t bins = 8;
    const EnvelopeMatrix env = mfcc_to_envelope(u, bins, false);
    for (std::size_t k = 0; k < bins; ++k) {
        const double w = kPi * static_cast<double>(k) / static_cast<double>(bins - 1);
        CHECK(env.rows[0][k] == doctest::Approx(2.0 * std::cos(w)).epsilon(1e-12));
    }
}

TEST_CASE("envelope is linear in the cepstrum") {
    Rng rng(9);
    Vector c(5);
    for (auto& v : c) {
        v = rng.uniform(-1.0, 1.0);
    }
    Vector c2 = c;
    for (auto& v : c2) {
        v *= 2.5;
    }
    const EnvelopeMatrix e1 = mfcc_to_envelope(coeff_utt("a", {c}), 32);
    const EnvelopeMatrix e2 = mfcc_to_envelope(coeff_utt("b", {c2}), 32);
    for (std::size_t k = 0; k < 32; ++k) {
        CHECK(e2.rows[0][k] == doctest::Approx(2.5 * e1.rows[0][k]).epsilon(1e-12));
    }
}

TEST_CASE("equal frames produce equal envelope rows") {
    const Vector c = {0.4, -0.3, 0.2};
    const Utterance u = coeff_utt("eq", {c, c, c});
    const EnvelopeMatrix env = mfcc_to_envelope(u, 12);
    REQUIRE(env.rows.size() == 3);
    CHECK(env.rows[0] == env.rows[1]);
    CHECK(env.rows[1] == env.rows[2]);
}

TEST_CASE("envelope guards") {
    const Utterance u = coeff_utt("g", {{0.0, 1.0, 0.0, 0.0}});
    CHECK_THROWS_AS(mfcc_to_envelope(u, 3), UsageError); // fewer bins than D
    Utterance e;
    e.id = "e";
    CHECK_THROWS_AS(mfcc_to_envelope(e, 16), DataError);
}

TEST_CASE("envelope csv round trips to 1e-9") {
    TempDir tmp("env");
    Rng rng(13);
    std::vector<Vector> rows(4, Vector(6));
    for (auto& r : rows) {
        for (auto& v : r) {
            v = rng.uniform(-2.0, 2.0);
        }
    }
    const Utterance u = coeff_utt("rt", rows);
    const EnvelopeMatrix env = mfcc_to_envelope(u, 20);
    const std::string path = tmp.file("env.csv");
    write_envelope_csv(env, path);

    const auto parsed = parse_csv(path, false);
    REQUIRE(parsed.size() == env.rows.size());
    for (std::size_t t = 0; t < parsed.size(); ++t) {
        REQUIRE(parsed[t].size() == env.n_bins);
        for (std::size_t k = 0; k < env.n_bins; ++k) {
            CHECK(parsed[t][k] == doctest::Approx(env.rows[t][k]).epsilon(1e-9));
        }
    }
}
