#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crosslink/rng.hpp"

using crosslink::Rng;

TEST_CASE("identical seeds reproduce identical sequences") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct stream ids give decorrelated substreams") {
    Rng a = Rng::stream(7, 0);
    Rng b = Rng::stream(7, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
    CHECK(same == 0);

    // Same (seed, stream) pair is reproducible.
    Rng c = Rng::stream(7, 1);
    Rng d = Rng::stream(7, 1);
    for (int i = 0; i < 64; ++i) CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("uniform moments and range") {
    Rng rng(42);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sumsq += u * u;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.03));
}

TEST_CASE("normal moments") {
    Rng rng(43);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, sumcube = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
        sumcube += x * x * x;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(sumcube / n) < 0.05);
}

TEST_CASE("complex normal has the requested total variance, split evenly") {
    Rng rng(44);
    const int n = 100000;
    double pwr = 0.0, re2 = 0.0, im2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto z = rng.cnormal(2.0);
        pwr += std::norm(z);
        re2 += z.real() * z.real();
        im2 += z.imag() * z.imag();
    }
    CHECK(pwr / n == doctest::Approx(2.0).epsilon(0.02));
    CHECK(re2 / n == doctest::Approx(1.0).epsilon(0.03));
    CHECK(im2 / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("bounded integer draws cover the range without bias") {
    Rng rng(45);
    int counts[5] = {0, 0, 0, 0, 0};
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[rng.below(5)]++;
    for (int c : counts) CHECK(std::abs(c - n / 5) < 500);
}
