#include <doctest.h>

#include <cmath>
#include <vector>

#include "afa/core/rng.hpp"

using afa::Rng;

TEST_CASE("rng: same seed reproduces the same sequence") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: derived streams are independent of each other") {
    const uint64_t s1 = afa::derive_seed(7, "env", 0);
    const uint64_t s2 = afa::derive_seed(7, "env", 1);
    const uint64_t s3 = afa::derive_seed(7, "policy", 0);
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(s2 != s3);
    CHECK(afa::derive_seed(7, "env", 0) == s1);
}

TEST_CASE("rng: uniform stays in [0,1) and has a sane mean") {
    Rng rng(99);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("rng: uniform_int covers the range uniformly") {
    Rng rng(5);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const uint64_t k = rng.uniform_int(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - n / 7) < 500);
}

TEST_CASE("rng: normal has mean 0 and variance 1") {
    Rng rng(2024);
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("rng: categorical matches its probabilities") {
    Rng rng(31);
    const double probs[3] = {0.2, 0.5, 0.3};
    int counts[3] = {0, 0, 0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs, 3)];
    CHECK(std::abs(counts[0] / double(n) - 0.2) < 0.01);
    CHECK(std::abs(counts[1] / double(n) - 0.5) < 0.01);
    CHECK(std::abs(counts[2] / double(n) - 0.3) < 0.01);
}
