// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <doctest.h>

#include "mixer/error.hpp"
#include "mixer/fsd.hpp"
#include "mixer/rng.hpp"
#include "test_util.hpp"

using namespace mixer;

namespace {

// Brute-force oracle: literal elementwise product in double, count < 0.
// Independent of the sign-comparison route used by the implementation.
double oracle_fsd(const AdapterCheckpoint& a, const AdapterCheckpoint& b) {
    std::uint64_t conflicts = 0;
    std::uint64_t total = 0;
    for (const auto& [name, ta] : a.tensors) {
        const Tensor& tb = b.tensors.at(name);
        for (std::size_t i = 0; i < ta.data.size(); ++i) {
            const double product = static_cast<double>(ta.data[i]) * tb.data[i];
            conflicts += product < 0.0;
        }
        total += ta.data.size();
    }
    return static_cast<double>(conflicts) / static_cast<double>(total);
}

AdapterCheckpoint negate(const AdapterCheckpoint& a) {
    AdapterCheckpoint out = a;
    for (auto& [name, tensor] : out.tensors) {
        for (auto& v : tensor.data) {
            v = -v;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("fsd_pair: worked example") {
    const auto a = testutil::single_tensor_checkpoint("w", {1.0f, -2.0f, 0.0f, 3.0f});
    const auto b = testutil::single_tensor_checkpoint("w", {-1.0f, -2.0f, 5.0f, 3.0f});
    // products [-1, 4, 0, 9]: one negative out of four
    CHECK(fsd_pair(a, b) == 0.25);
    CHECK(fsd_pair(a, b) == oracle_fsd(a, b));
}

TEST_CASE("fsd_pair: self, negation, zeros") {
    const auto a = testutil::random_checkpoint(5, 3, 41);
    CHECK(fsd_pair(a, a) == 0.0);

    // normal() never returns exactly 0, so a is zero-free
    CHECK(fsd_pair(a, negate(a)) == 1.0);

    AdapterCheckpoint zeros = a;
    for (auto& [name, tensor] : zeros.tensors) {
        for (auto& v : tensor.data) {
            v = 0.0f;
        }
    }
    CHECK(fsd_pair(zeros, a) == 0.0);
}

TEST_CASE("fsd_pair: incompatible checkpoints error") {
    const auto a = testutil::single_tensor_checkpoint("w", {1.0f});
    const auto b = testutil::single_tensor_checkpoint("v", {1.0f});
    CHECK_THROWS_AS(fsd_pair(a, b), Error);
}

TEST_CASE("fsd properties on seeded cases") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto a = testutil::random_checkpoint(seed * 2 + 1, 2, 23);
        const auto b = testutil::random_checkpoint(seed * 2 + 2, 2, 23);

        const double ab = fsd_pair(a, b);
        CHECK(ab == fsd_pair(b, a));       // symmetry
        CHECK(ab == oracle_fsd(a, b));     // oracle equality, exact
        CHECK(fsd_pair(a, a) == 0.0);

        // invariance under positive per-element scaling of one side
        AdapterCheckpoint scaled = a;
        Rng rng(seed + 777);
        for (auto& [name, tensor] : scaled.tensors) {
            for (auto& v : tensor.data) {
                v *= static_cast<float>(0.01 + 10.0 * rng.uniform01());
            }
        }
        CHECK(fsd_pair(scaled, b) == ab);
    }
}

TEST_CASE("fsd_per_tensor: worked example and weighted-mean identity") {
    AdapterCheckpoint a;
    a.tensors.emplace("x", Tensor({2}, {1.0f, -1.0f}));
    a.tensors.emplace("y", Tensor({2}, {2.0f, 2.0f}));
    AdapterCheckpoint b;
    b.tensors.emplace("x", Tensor({2}, {-1.0f, -1.0f}));
    b.tensors.emplace("y", Tensor({2}, {2.0f, -2.0f}));

    const auto per_tensor = fsd_per_tensor(a, b);
    CHECK(per_tensor.at("x") == 0.5);
    CHECK(per_tensor.at("y") == 0.5);

    const auto same = fsd_per_tensor(a, a);
    CHECK(same.at("x") == 0.0);
    CHECK(same.at("y") == 0.0);
}

TEST_CASE("fsd_per_tensor: element-count-weighted mean equals fsd_pair") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        AdapterCheckpoint a;
        AdapterCheckpoint b;
        Rng rng(seed);
        const int sizes[] = {7, 19, 3};
        for (int t = 0; t < 3; ++t) {
            Tensor ta, tb;
            ta.shape = {static_cast<std::uint64_t>(sizes[t])};
            tb.shape = ta.shape;
            for (int i = 0; i < sizes[t]; ++i) {
                ta.data.push_back(static_cast<float>(rng.normal()));
                tb.data.push_back(static_cast<float>(rng.normal()));
            }
            a.tensors.emplace("t" + std::to_string(t), std::move(ta));
            b.tensors.emplace("t" + std::to_string(t), std::move(tb));
        }
        const auto per_tensor = fsd_per_tensor(a, b);
        double weighted = 0.0;
        std::uint64_t total = 0;
        for (const auto& [name, fraction] : per_tensor) {
            const auto n = a.tensors.at(name).size();
            weighted += fraction * static_cast<double>(n);
            total += n;
        }
        CHECK(std::fabs(weighted / static_cast<double>(total) - fsd_pair(a, b)) <= 1e-12);
    }
}

TEST_CASE("fsd_matrix") {
    SUBCASE("single adapter -> 1x1 zero") {
        const auto a = testutil::random_checkpoint(9, 1, 5);
        const FsdMatrix m = fsd_matrix(std::vector<AdapterCheckpoint>{a}, {"a"});
        CHECK(m.k == 1);
        CHECK(m.at(0, 0) == 0.0);
    }
    SUBCASE("[a, -a] -> [[0,1],[1,0]]") {
        const auto a = testutil::random_checkpoint(10, 2, 17);
        const std::vector<AdapterCheckpoint> pool = {a, negate(a)};
        const FsdMatrix m = fsd_matrix(pool, {"a", "neg"});
        CHECK(m.at(0, 1) == 1.0);
        CHECK(m.at(1, 0) == 1.0);
        CHECK(m.at(0, 0) == 0.0);
        CHECK(m.at(1, 1) == 0.0);
    }
    SUBCASE("4 seeded adapters match the pairwise oracle entrywise") {
        std::vector<AdapterCheckpoint> pool;
        std::vector<std::string> labels;
        for (int i = 0; i < 4; ++i) {
            pool.push_back(testutil::random_checkpoint(100 + i, 3, 29));
            labels.push_back("a" + std::to_string(i));
        }
        const FsdMatrix m = fsd_matrix(pool, labels);
        m.validate();
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                const double expected = i == j ? 0.0 : oracle_fsd(pool[i], pool[j]);
                CHECK(m.at(i, j) == expected);
            }
        }
    }
    SUBCASE("threaded result is identical to single-threaded") {
        std::vector<AdapterCheckpoint> pool;
        std::vector<std::string> labels;
        for (int i = 0; i < 5; ++i) {
            pool.push_back(testutil::random_checkpoint(200 + i, 2, 31));
            labels.push_back("a" + std::to_string(i));
        }
        const FsdMatrix m1 = fsd_matrix(pool, labels, 1);
        const FsdMatrix m4 = fsd_matrix(pool, labels, 4);
        CHECK(m1.values == m4.values);
    }
}

TEST_CASE("mean_fsd_rows") {
    SUBCASE("[[0,1],[1,0]] -> [0.5, 0.5]") {
        FsdMatrix m;
        m.k = 2;
        m.labels = {"a", "b"};
        m.values = {0.0, 1.0, 1.0, 0.0};
        CHECK(mean_fsd_rows(m) == std::vector<double>{0.5, 0.5});
    }
    SUBCASE("3x3 worked example (diagonal included, divide by k)") {
        FsdMatrix m;
        m.k = 3;
        m.labels = {"a", "b", "c"};
        m.values = {0.0, 0.2, 0.4, 0.2, 0.0, 0.6, 0.4, 0.6, 0.0};
        const auto means = mean_fsd_rows(m);
        // brute-force check of the same numbers the spec quotes
        const double expected[] = {(0.2 + 0.4) / 3.0, (0.2 + 0.6) / 3.0, (0.4 + 0.6) / 3.0};
        REQUIRE(means.size() == 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(std::fabs(means[i] - expected[i]) <= 1e-9);
        }
        CHECK(std::fabs(means[0] - 0.2) <= 1e-9);
        CHECK(std::fabs(means[1] - 0.2667) <= 1e-4);
        CHECK(std::fabs(means[2] - 0.3333) <= 1e-4);
    }
    SUBCASE("all-zero matrix -> all-zero vector") {
        FsdMatrix m;
        m.k = 4;
        m.labels = {"a", "b", "c", "d"};
        m.values.assign(16, 0.0);
        CHECK(mean_fsd_rows(m) == std::vector<double>(4, 0.0));
    }
}

TEST_CASE("fsd CSV round-trip at 9 decimals") {
    testutil::TempDir tmp("fsd_csv");
    std::vector<AdapterCheckpoint> pool;
    std::vector<std::string> labels;
    for (int i = 0; i < 3; ++i) {
        pool.push_back(testutil::random_checkpoint(300 + i, 2, 51));
        labels.push_back("adapter" + std::to_string(i));
    }
    const FsdMatrix m = fsd_matrix(pool, labels);
    write_fsd_csv(m, tmp / "fsd.csv");
    const FsdMatrix back = read_fsd_csv(tmp / "fsd.csv");
    CHECK(back.labels == m.labels);
    REQUIRE(back.values.size() == m.values.size());
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        CHECK(std::fabs(back.values[i] - m.values[i]) <= 5e-10);  // 9-decimal rounding
    }
}
