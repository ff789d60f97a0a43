#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "crosslink/channel.hpp"
#include "crosslink/rng.hpp"

using namespace crosslink;

namespace {

Numerology small_num(int sc = 12, int sym = 14, int tx = 2, int rx = 2, int sb = 1) {
    Numerology n;
    n.n_subcarriers = sc;
    n.n_symbols = sym;
    n.n_tx = tx;
    n.n_rx = rx;
    n.n_subbands = sb;
    return n;
}

}  // namespace

TEST_CASE("numerology validation") {
    CHECK_NOTHROW(small_num().validate());
    Numerology n = small_num();
    n.n_subbands = 5;  // does not divide 12
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
    n = small_num();
    n.n_tx = 0;
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
    n = small_num();
    n.subcarrier_spacing_hz = -1.0;
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
    CHECK(small_num(12, 14, 2, 2, 3).subband_width() == 4);
    CHECK(small_num(12, 14, 2, 2, 3).subband_of(7) == 1);
}

TEST_CASE("profile validation") {
    CHECK_NOTHROW(TdlProfile::flat().validate());
    TdlProfile p = TdlProfile::flat();
    p.powers = {0.5};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = TdlProfile::flat();
    p.delays_s = {-1e-9};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = TdlProfile::flat();
    p.tx_corr = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = TdlProfile::flat();
    p.delays_s = {0.0, 1e-7};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);  // powers length mismatch
}

TEST_CASE("flat profile is frequency flat and block fading") {
    const Numerology num = small_num(24, 14, 2, 2);
    const ChannelRealization h = sample_channel(TdlProfile::flat(), num, 7);
    for (int f = 1; f < num.n_subcarriers; ++f)
        for (int r = 0; r < 2; ++r)
            for (int t = 0; t < 2; ++t)
                CHECK(std::abs(h.at(r, t, f) - h.at(r, t, 0)) == doctest::Approx(0.0));
    // Symbol index never changes the response within the slot.
    for (int f = 0; f < num.n_subcarriers; ++f) {
        const CMatrix a = h.matrix_at(f, 0);
        const CMatrix b = h.matrix_at(f, 13);
        for (std::size_t i = 0; i < a.a.size(); ++i) CHECK(a.a[i] == b.a[i]);
    }
}

TEST_CASE("multi-tap profiles are frequency selective") {
    TdlProfile p;
    p.name = "two_tap";
    p.delays_s = {0.0, 1e-6};
    p.powers = {0.5, 0.5};
    const Numerology num = small_num(24, 1, 1, 1);
    const ChannelRealization h = sample_channel(p, num, 3);
    double max_dev = 0.0;
    for (int f = 1; f < num.n_subcarriers; ++f)
        max_dev = std::max(max_dev, std::abs(h.at(0, 0, f) - h.at(0, 0, 0)));
    CHECK(max_dev > 1e-3);
}

TEST_CASE("per-pair average power is one") {
    const Numerology num = small_num(4, 1, 2, 2);
    TdlProfile p;
    p.delays_s = {0.0, 3e-7, 8e-7};
    p.powers = {0.5, 0.3, 0.2};
    double acc = 0.0;
    const int draws = 4000;
    for (int d = 0; d < draws; ++d) {
        const ChannelRealization h = sample_channel(p, num, 1000 + static_cast<std::uint64_t>(d));
        acc += std::norm(h.at(0, 1, 0));
    }
    // Var of |h|^2 for CN(0,1) is 1, so the 3-sigma band is ~3/sqrt(draws).
    CHECK(acc / draws == doctest::Approx(1.0).epsilon(0.06));
}

TEST_CASE("transmit correlation follows the exponential model") {
    const Numerology num = small_num(1, 1, 2, 1);
    TdlProfile p = TdlProfile::flat();
    p.tx_corr = 0.9;
    cd cross = 0.0;
    double pow0 = 0.0, pow1 = 0.0;
    const int draws = 6000;
    for (int d = 0; d < draws; ++d) {
        const ChannelRealization h = sample_channel(p, num, 50000 + static_cast<std::uint64_t>(d));
        cross += h.at(0, 0, 0) * std::conj(h.at(0, 1, 0));
        pow0 += std::norm(h.at(0, 0, 0));
        pow1 += std::norm(h.at(0, 1, 0));
    }
    CHECK((cross.real() / draws) == doctest::Approx(0.9).epsilon(0.08));
    CHECK(std::fabs(cross.imag() / draws) < 0.05);
    CHECK(pow0 / draws == doctest::Approx(1.0).epsilon(0.08));
    CHECK(pow1 / draws == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("large rician factor pins the tap to its fixed component") {
    const Numerology num = small_num(1, 1, 1, 1);
    TdlProfile p = TdlProfile::flat();
    p.rician_k = 1e8;
    const ChannelRealization h = sample_channel(p, num, 11);
    CHECK(h.at(0, 0, 0).real() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::fabs(h.at(0, 0, 0).imag()) < 1e-3);
}

TEST_CASE("sampling is deterministic per seed") {
    const Numerology num = small_num();
    const ChannelRealization a = sample_channel(TdlProfile::flat(), num, 42);
    const ChannelRealization b = sample_channel(TdlProfile::flat(), num, 42);
    const ChannelRealization c = sample_channel(TdlProfile::flat(), num, 43);
    CHECK(a.h == b.h);
    double dev = 0.0;
    for (std::size_t i = 0; i < a.h.size(); ++i) dev += std::abs(a.h[i] - c.h[i]);
    CHECK(dev > 1e-6);
}

TEST_CASE("noiseless transmit equals the direct per-re product") {
    const Numerology num = small_num(6, 3, 2, 2);
    ChannelRealization h = sample_channel(TdlProfile::flat(), num, 5);
    h.noise_variance = 0.0;
    Rng rng(8);
    ResourceGrid x(2, 6, 3);
    for (cd& v : x.v) v = rng.cnormal(1.0);
    const ResourceGrid y = transmit(h, x, 99);
    for (int f = 0; f < 6; ++f)
        for (int t = 0; t < 3; ++t)
            for (int r = 0; r < 2; ++r) {
                cd want = 0.0;
                for (int c = 0; c < 2; ++c) want += h.at(r, c, f) * x.at(c, f, t);
                CHECK(std::abs(y.at(r, f, t) - want) < 1e-14);
            }
}

TEST_CASE("transmit noise has the configured variance") {
    const Numerology num = small_num(50, 10, 1, 1);
    ChannelRealization h = sample_channel(TdlProfile::flat(), num, 5);
    h.noise_variance = 0.25;
    ResourceGrid x(1, 50, 10);  // zero input isolates the noise
    double acc = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        const ResourceGrid y = transmit(h, x, 300 + static_cast<std::uint64_t>(rep));
        for (const cd& v : y.v) acc += std::norm(v);
    }
    acc /= static_cast<double>(reps) * 500.0;
    CHECK(acc == doctest::Approx(0.25).epsilon(0.05));
    // Same seed reproduces the same noise.
    ChannelRealization h2 = h;
    const ResourceGrid y1 = transmit(h, x, 1234);
    const ResourceGrid y2 = transmit(h2, x, 1234);
    CHECK(y1.v == y2.v);
}

TEST_CASE("transmit validates the grid shape") {
    const Numerology num = small_num(6, 3, 2, 2);
    const ChannelRealization h = sample_channel(TdlProfile::flat(), num, 5);
    ResourceGrid bad(2, 6, 4);
    CHECK_THROWS_AS(transmit(h, bad, 1), std::invalid_argument);
}

TEST_CASE("snr to noise variance") {
    CHECK(snr_to_noise_variance(10.0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(snr_to_noise_variance(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(snr_to_noise_variance(-10.0, 2.0) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK_THROWS_AS(snr_to_noise_variance(0.0, 0.0), std::invalid_argument);
}

TEST_CASE("profile json loading") {
    const std::string path = "test_profile_tmp.json";
    {
        std::ofstream out(path);
        out << R"({"name":"toy","delays_ns":[0.0,100.0],"powers_db":[0.0,-3.0],)"
            << R"("rician_k":0.5,"tx_corr":0.3,"rx_corr":0.2})";
    }
    const TdlProfile p = TdlProfile::from_json_file(path);
    CHECK(p.name == "toy");
    REQUIRE(p.delays_s.size() == 2);
    CHECK(p.delays_s[1] == doctest::Approx(1e-7).epsilon(1e-12));
    const double lin = std::pow(10.0, -0.3);
    CHECK(p.powers[0] == doctest::Approx(1.0 / (1.0 + lin)).epsilon(1e-12));
    CHECK(p.powers[0] + p.powers[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.rician_k == doctest::Approx(0.5));
    CHECK(p.tx_corr == doctest::Approx(0.3));
    std::remove(path.c_str());

    CHECK_THROWS(TdlProfile::from_json_file("does_not_exist.json"));
    {
        std::ofstream out(path);
        out << R"({"name":"broken","powers":[1.0]})";  // no delays
    }
    CHECK_THROWS(TdlProfile::from_json_file(path));
    std::remove(path.c_str());
}

TEST_CASE("shipped profile files load and validate") {
    const std::string base = std::string(CROSSLINK_DATA_DIR) + "/profiles/";
    for (const char* name : {"flat.json", "cdl_c_300ns.json", "two_tap_rician.json"}) {
        const TdlProfile p = TdlProfile::from_json_file(base + name);
        CHECK_NOTHROW(p.validate());
        double sum = 0.0;
        for (double v : p.powers) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}
