// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "mixer/rng.hpp"
#include "mixer/stats.hpp"

using namespace mixer;

namespace {

// Brute-force oracle for tie-free inputs: rank = 1 + number of smaller
// elements, then textbook Pearson.
double oracle_spearman_no_ties(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> rx(n), ry(n);
    for (std::size_t i = 0; i < n; ++i) {
        rx[i] = 1 + std::count_if(x.begin(), x.end(), [&](double v) { return v < x[i]; });
        ry[i] = 1 + std::count_if(y.begin(), y.end(), [&](double v) { return v < y[i]; });
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("average_ranks handles ties by averaging") {
    const std::vector<double> v = {3.0, 1.0, 3.0, 2.0};
    CHECK(average_ranks(v) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("spearman matches the brute-force oracle on tie-free inputs") {
    Rng rng(321);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.uniform_int(30);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.normal();
            y[i] = rng.normal();
        }
        CHECK(std::fabs(spearman(x, y) - oracle_spearman_no_ties(x, y)) <= 1e-12);
    }
}

TEST_CASE("spearman on monotone data") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> up = {10, 20, 30, 40, 50};
    const std::vector<double> down = {5, 4, 3, 2, 1};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
}

TEST_CASE("spearman is NaN for constant input") {
    const std::vector<double> x = {1, 1, 1, 1};
    const std::vector<double> y = {1, 2, 3, 4};
    CHECK(std::isnan(spearman(x, y)));
    CHECK(std::isnan(pearson(x, y)));
    CHECK(std::isnan(spearman(std::vector<double>{1.0}, std::vector<double>{2.0})));
}

TEST_CASE("spearman with ties against a hand-computed value") {
    // x ranks: [1.5, 1.5, 3]; y ranks: [1, 2, 3]
    const std::vector<double> x = {5.0, 5.0, 9.0};
    const std::vector<double> y = {1.0, 2.0, 3.0};
    // Pearson([1.5,1.5,3],[1,2,3]) = (sxy=1.5)/sqrt(1.5*2) = 0.86602...
    CHECK(spearman(x, y) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
}
