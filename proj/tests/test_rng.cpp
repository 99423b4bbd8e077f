#include <doctest.h>

#include "invlab/rng.hpp"

#include <cmath>
#include <vector>

using namespace invlab;

TEST_CASE("same (seed, stream) reproduces the exact draw sequence") {
    RngStream a(42, 3), b(42, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different stream ids decorrelate immediately") {
    RngStream a(42, 0), b(42, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("fork is pure: does not disturb parent state and is reproducible") {
    RngStream parent(7, 5);
    parent.uniform();
    RngStream ref(7, 5);
    ref.uniform();

    RngStream c1 = parent.fork(2);
    RngStream c2 = RngStream(7, 5).fork(2);
    // fork(2) from a fresh stream with the same identity matches: identity is
    // (seed, id), not internal position.
    c2.uniform();  // burn nothing relevant; compare sequences from scratch instead
    RngStream c3 = RngStream(7, 5).fork(2);
    CHECK(c1.next_u64() == c3.next_u64());
    CHECK(parent.next_u64() == ref.next_u64());

    CHECK(parent.fork(1).next_u64() != parent.fork(2).next_u64());
}

TEST_CASE("uniform lies in [0,1), uniform_open in (0,1)") {
    RngStream rng(1, 0);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = rng.uniform_open();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("normal moments over 1e5 draws") {
    RngStream rng(123, 9);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform variance near 1/12") {
    RngStream rng(321, 2);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.uniform();
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}

TEST_CASE("laplace(b) has variance 2 b^2") {
    RngStream rng(55, 4);
    const int n = 200000;
    const double b = 0.7;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.laplace(b);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) <= 0.01);
    CHECK(var == doctest::Approx(2.0 * b * b).epsilon(0.03));
}

TEST_CASE("uniform_range covers the requested interval") {
    RngStream rng(9, 9);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 20000; ++i) {
        double x = rng.uniform_range(-2.0, 3.0);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        CHECK(x >= -2.0);
        CHECK(x < 3.0);
    }
    CHECK(lo <= -1.99);
    CHECK(hi >= 2.99);
}
