#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "crosslink/llr.hpp"
#include "crosslink/qam.hpp"
#include "crosslink/rng.hpp"

using namespace crosslink;

namespace {

// Independent demapper oracle: explicit two-minima scan written against the
// published definition, structured differently from the library routine.
std::vector<double> oracle_maxlog(const QamConstellation& c, cd y, double gain, double sigma2) {
    const int m = c.bits_per_symbol;
    std::vector<double> llr(static_cast<std::size_t>(m));
    for (int b = 0; b < m; ++b) {
        double d0 = std::numeric_limits<double>::infinity();
        double d1 = std::numeric_limits<double>::infinity();
        for (int label = 0; label < c.order(); ++label) {
            const double dist = std::norm(y - gain * c.points[static_cast<std::size_t>(label)]);
            if ((label >> (m - 1 - b)) & 1)
                d1 = std::min(d1, dist);
            else
                d0 = std::min(d0, dist);
        }
        llr[static_cast<std::size_t>(b)] =
            std::clamp((d1 - d0) / sigma2, -kLlrClip, kLlrClip);
    }
    return llr;
}

std::vector<std::uint8_t> random_bits(Rng& rng, std::size_t count) {
    std::vector<std::uint8_t> bits(count);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
    return bits;
}

}  // namespace

TEST_CASE("constellations have unit average power") {
    for (int m : {2, 4, 6, 8}) {
        const QamConstellation c = make_qam(m);
        CHECK(c.order() == (1 << m));
        CHECK(c.average_power() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("labels are bijective onto distinct points") {
    for (int m : {2, 4, 6, 8}) {
        const QamConstellation c = make_qam(m);
        for (int i = 0; i < c.order(); ++i)
            for (int j = i + 1; j < c.order(); ++j)
                CHECK(std::abs(c.points[std::size_t(i)] - c.points[std::size_t(j)]) > 1e-9);
    }
}

TEST_CASE("nearest neighbours differ in exactly one bit") {
    for (int m : {2, 4, 6, 8}) {
        const QamConstellation c = make_qam(m);
        const double dmin = c.min_distance();
        for (int i = 0; i < c.order(); ++i)
            for (int j = i + 1; j < c.order(); ++j) {
                const double d = std::abs(c.points[std::size_t(i)] - c.points[std::size_t(j)]);
                if (d < dmin * (1.0 + 1e-9))
                    CHECK(std::popcount(static_cast<unsigned>(i ^ j)) == 1);
            }
    }
}

TEST_CASE("qpsk reference points") {
    const QamConstellation c = make_qam(2);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(c.points[0].real() == doctest::Approx(s).epsilon(1e-15));   // bits 00
    CHECK(c.points[0].imag() == doctest::Approx(s).epsilon(1e-15));
    CHECK(c.points[1].real() == doctest::Approx(s).epsilon(1e-15));   // bits 01
    CHECK(c.points[1].imag() == doctest::Approx(-s).epsilon(1e-15));
    CHECK(c.points[2].real() == doctest::Approx(-s).epsilon(1e-15));  // bits 10
    CHECK(c.points[3].real() == doctest::Approx(-s).epsilon(1e-15));  // bits 11
    CHECK(c.points[3].imag() == doctest::Approx(-s).epsilon(1e-15));
}

TEST_CASE("16qam minimum distance") {
    CHECK(make_qam(4).min_distance() == doctest::Approx(2.0 / std::sqrt(10.0)).epsilon(1e-12));
}

TEST_CASE("modulation maps bit groups msb-first") {
    const QamConstellation c = make_qam(4);
    const std::vector<std::uint8_t> bits = {0, 1, 1, 0, 1, 1, 1, 1};
    const auto syms = qam_modulate(c, bits);
    REQUIRE(syms.size() == 2);
    CHECK(syms[0] == c.points[0b0110]);
    CHECK(syms[1] == c.points[0b1111]);
}

TEST_CASE("demapper matches the exhaustive two-minima oracle") {
    Rng rng(917);
    for (int m : {2, 4, 6, 8}) {
        const QamConstellation c = make_qam(m);
        for (int trial = 0; trial < 200; ++trial) {
            const cd y(rng.normal() * 1.5, rng.normal() * 1.5);
            const double gain = 0.2 + rng.uniform(0.0, 1.5);
            const double sigma2 = 0.05 + rng.uniform(0.0, 1.0);
            double got[8];
            qam_demodulate_maxlog(c, y, gain, sigma2, got);
            const auto want = oracle_maxlog(c, y, gain, sigma2);
            for (int b = 0; b < m; ++b)
                CHECK(got[b] == doctest::Approx(want[std::size_t(b)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("noiseless llr signs recover the transmitted bits") {
    Rng rng(411);
    for (int m : {2, 4, 6, 8}) {
        const QamConstellation c = make_qam(m);
        const auto bits = random_bits(rng, static_cast<std::size_t>(m) * 40);
        const auto syms = qam_modulate(c, bits);
        const auto llrs = qam_demodulate_maxlog(c, syms, 1.0, 1e-3);
        REQUIRE(llrs.size() == bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            // Positive log ratio means bit 0.
            CHECK((llrs[i] > 0) == (bits[i] == 0));
            CHECK(std::fabs(llrs[i]) <= kLlrClip + 1e-12);
        }
    }
}

TEST_CASE("hard decisions survive moderate noise on 16qam") {
    Rng rng(5150);
    const QamConstellation c = make_qam(4);
    const auto bits = random_bits(rng, 4 * 500);
    const auto syms = qam_modulate(c, bits);
    const double sigma2 = 1e-3;  // ~30 dB, far above the hard-decision floor
    std::size_t wrong = 0;
    for (std::size_t s = 0; s < syms.size(); ++s) {
        const cd y = syms[s] + rng.cnormal(sigma2);
        double llr[4];
        qam_demodulate_maxlog(c, y, 1.0, sigma2, llr);
        for (int b = 0; b < 4; ++b)
            wrong += (llr[b] > 0) != (bits[s * 4 + std::size_t(b)] == 0);
    }
    CHECK(wrong == 0);
}

TEST_CASE("scaled channel gain shifts the decision reference") {
    const QamConstellation c = make_qam(2);
    // y sits exactly on gain*point for label 0; with unit gain it would not.
    const double g = 3.0;
    double llr[2];
    qam_demodulate_maxlog(c, g * c.points[0], g, 0.1, llr);
    CHECK(llr[0] > 0);
    CHECK(llr[1] > 0);
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(make_qam(3), std::invalid_argument);
    CHECK_THROWS_AS(make_qam(10), std::invalid_argument);
    const QamConstellation c = make_qam(2);
    CHECK_THROWS_AS(qam_modulate(c, {1, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(qam_modulate(c, {2, 0}), std::invalid_argument);
    double llr[2];
    CHECK_THROWS_AS(qam_demodulate_maxlog(c, cd(0, 0), 1.0, 0.0, llr), std::invalid_argument);
}
