// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <doctest.h>

#include "mixer/error.hpp"
#include "mixer/mix.hpp"
#include "mixer/prune.hpp"
#include "mixer/rng.hpp"
#include "test_util.hpp"

using namespace mixer;

namespace {

// Oracle: survivors = top (n - floor(s*n)) by (|w| desc, index asc).
std::set<std::size_t> oracle_survivors(const std::vector<float>& w, double s) {
    const std::size_t drop = static_cast<std::size_t>(std::floor(s * w.size() + 1e-9));
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const float ma = std::fabs(w[a]);
        const float mb = std::fabs(w[b]);
        if (ma != mb) {
            return ma > mb;
        }
        return a < b;
    });
    return std::set<std::size_t>(order.begin(), order.begin() + (w.size() - drop));
}

std::set<std::size_t> survivors_of(const PruneResult& result, const std::string& tensor) {
    std::set<std::size_t> out;
    const auto& keep = result.mask.keep.at(tensor);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) {
            out.insert(i);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("magnitude_prune: worked example") {
    const auto a = testutil::single_tensor_checkpoint("w", {0.1f, -0.5f, 0.3f, -0.2f});
    const PruneResult result = magnitude_prune(a, 0.5);
    CHECK(result.adapter.tensors.at("w").data ==
          std::vector<float>{0.0f, -0.5f, 0.3f, 0.0f});
    CHECK(result.mask.keep.at("w") == std::vector<std::uint8_t>{0, 1, 1, 0});
    CHECK(result.adapter.metadata.at("prune.sparsity") == "0.5");
    CHECK(result.adapter.metadata.at("prune.scope") == "per-tensor");
}

TEST_CASE("magnitude_prune: s=0 identity, mask all-true") {
    const auto a = testutil::random_checkpoint(3, 2, 20);
    const PruneResult result = magnitude_prune(a, 0.0);
    CHECK(tensors_bitwise_equal(result.adapter, a));
    for (const auto& [name, keep] : result.mask.keep) {
        CHECK(std::all_of(keep.begin(), keep.end(), [](std::uint8_t k) { return k == 1; }));
    }
}

TEST_CASE("magnitude_prune: s=0.9 on 100 elements keeps the top 10") {
    Rng rng(17);
    std::vector<float> w(100);
    for (auto& v : w) {
        v = static_cast<float>(rng.normal());
    }
    const auto a = testutil::single_tensor_checkpoint("w", w);
    const PruneResult result = magnitude_prune(a, 0.9);
    CHECK(survivors_of(result, "w") == oracle_survivors(w, 0.9));
    CHECK(result.mask.kept_count("w") == 10);
}

TEST_CASE("magnitude_prune: exact sparsity, nesting, idempotence, tie rule") {
    Rng rng(29);
    AdapterCheckpoint a;
    const int sizes[] = {64, 33, 10};
    for (int t = 0; t < 3; ++t) {
        Tensor tensor;
        tensor.shape = {static_cast<std::uint64_t>(sizes[t])};
        for (int i = 0; i < sizes[t]; ++i) {
            tensor.data.push_back(static_cast<float>(rng.normal()));
        }
        a.tensors.emplace("t" + std::to_string(t), std::move(tensor));
    }

    SUBCASE("exact floor(s*n) zeros per tensor for the spec's sparsity grid") {
        for (const double s : {0.4, 0.5, 0.8, 0.9}) {
            const PruneResult result = magnitude_prune(a, s);
            for (const auto& [name, tensor] : result.adapter.tensors) {
                const std::uint64_t n = tensor.size();
                const auto drop = static_cast<std::uint64_t>(std::floor(s * n + 1e-9));
                CHECK(result.mask.kept_count(name) == n - drop);
                CHECK(survivors_of(result, name) == oracle_survivors(a.tensors.at(name).data, s));
                // survivors keep their exact original values
                for (std::size_t i = 0; i < tensor.data.size(); ++i) {
                    if (result.mask.keep.at(name)[i]) {
                        CHECK(tensor.data[i] == a.tensors.at(name).data[i]);
                    } else {
                        CHECK(tensor.data[i] == 0.0f);
                    }
                }
            }
        }
    }
    SUBCASE("idempotence at the same sparsity") {
        for (const double s : {0.4, 0.9}) {
            const PruneResult once = magnitude_prune(a, s);
            const PruneResult twice = magnitude_prune(once.adapter, s);
            CHECK(tensors_bitwise_equal(twice.adapter, once.adapter));
            CHECK(twice.mask.keep == once.mask.keep);
        }
    }
    SUBCASE("survivor sets nest as sparsity grows") {
        const double grid[] = {0.1, 0.3, 0.5, 0.7, 0.9};
        for (std::size_t g = 1; g < 5; ++g) {
            const PruneResult lo = magnitude_prune(a, grid[g - 1]);
            const PruneResult hi = magnitude_prune(a, grid[g]);
            for (const auto& [name, keep] : hi.mask.keep) {
                const auto hi_set = survivors_of(hi, name);
                const auto lo_set = survivors_of(lo, name);
                CHECK(std::includes(lo_set.begin(), lo_set.end(), hi_set.begin(), hi_set.end()));
            }
        }
    }
    SUBCASE("equal magnitudes keep the lower flat index") {
        const auto ties = testutil::single_tensor_checkpoint("w", {1.0f, -1.0f, 1.0f, -1.0f});
        const PruneResult result = magnitude_prune(ties, 0.5);
        CHECK(result.mask.keep.at("w") == std::vector<std::uint8_t>{1, 1, 0, 0});
    }
    SUBCASE("pre-existing zeros are pruned preferentially") {
        const auto z = testutil::single_tensor_checkpoint("w", {0.0f, 5.0f, 0.0f, 1.0f});
        const PruneResult result = magnitude_prune(z, 0.5);
        CHECK(result.mask.keep.at("w") == std::vector<std::uint8_t>{0, 1, 0, 1});
    }
    SUBCASE("bounds") {
        CHECK_THROWS_AS(magnitude_prune(a, 1.0), Error);
        CHECK_THROWS_AS(magnitude_prune(a, -0.1), Error);
    }
}

TEST_CASE("magnitude_prune: global scope pools all tensors") {
    AdapterCheckpoint a;
    a.tensors.emplace("big", Tensor({2}, {10.0f, 9.0f}));
    a.tensors.emplace("small", Tensor({2}, {0.1f, 0.2f}));
    const PruneResult result = magnitude_prune(a, 0.5, PruneScope::Global);
    // the two smallest magnitudes across both tensors are in "small"
    CHECK(result.adapter.tensors.at("big").data == std::vector<float>{10.0f, 9.0f});
    CHECK(result.adapter.tensors.at("small").data == std::vector<float>{0.0f, 0.0f});
    CHECK(result.adapter.metadata.at("prune.scope") == "global");
}

TEST_CASE("mask JSON round-trip") {
    testutil::TempDir tmp("mask");
    PruneMask mask;
    mask.keep["a"] = {1, 1, 0, 0, 1};
    mask.keep["b"] = {0, 0, 1};
    mask.keep["c"] = {1};
    write_mask_json(mask, tmp / "mask.json");
    const PruneMask back = read_mask_json(tmp / "mask.json");
    CHECK(back.keep == mask.keep);
}

TEST_CASE("select_conflict_layers") {
    SUBCASE("2 adapters, forced example") {
        // "x": half conflicting; "y": none
        AdapterCheckpoint a;
        a.tensors.emplace("x", Tensor({2}, {1.0f, -1.0f}));
        a.tensors.emplace("y", Tensor({2}, {2.0f, 2.0f}));
        AdapterCheckpoint b;
        b.tensors.emplace("x", Tensor({2}, {-1.0f, -1.0f}));
        b.tensors.emplace("y", Tensor({2}, {2.0f, 2.0f}));
        const std::vector<AdapterCheckpoint> pool = {a, b};
        CHECK(select_conflict_layers(0, pool, 1) == std::vector<std::string>{"x"});
        CHECK(select_conflict_layers(0, pool, 2) == std::vector<std::string>{"x", "y"});
    }
    SUBCASE("4 seeded adapters match the averaging oracle") {
        // equal-sized tensors, so the mean per-tensor fraction ranks exactly
        // like the summed conflict count; the oracle counts negative double
        // products, independent of the implementation's sign comparisons
        std::vector<AdapterCheckpoint> pool;
        for (int i = 0; i < 4; ++i) {
            pool.push_back(testutil::random_checkpoint(700 + i, 5, 13));
        }
        for (std::size_t target = 0; target < 4; ++target) {
            std::map<std::string, std::uint64_t> count;
            for (std::size_t j = 0; j < 4; ++j) {
                if (j == target) {
                    continue;
                }
                for (const auto& [name, tensor] : pool[target].tensors) {
                    const auto& other = pool[j].tensors.at(name);
                    for (std::size_t e = 0; e < tensor.data.size(); ++e) {
                        count[name] +=
                            static_cast<double>(tensor.data[e]) * other.data[e] < 0.0;
                    }
                }
            }
            std::vector<std::string> names;
            for (const auto& [name, c] : count) {
                names.push_back(name);
            }
            std::stable_sort(names.begin(), names.end(), [&](const auto& x, const auto& y) {
                return count[x] > count[y];
            });
            for (std::size_t m = 1; m <= 5; ++m) {
                const auto selected = select_conflict_layers(target, pool, m);
                const std::vector<std::string> expected(names.begin(), names.begin() + m);
                CHECK(selected == expected);
            }
        }
    }
    SUBCASE("bounds") {
        std::vector<AdapterCheckpoint> pool = {testutil::random_checkpoint(1, 2, 4),
                                               testutil::random_checkpoint(2, 2, 4)};
        CHECK_THROWS_AS(select_conflict_layers(0, pool, 0), Error);
        CHECK_THROWS_AS(select_conflict_layers(0, pool, 3), Error);
        CHECK_THROWS_AS(select_conflict_layers(5, pool, 1), Error);
        std::vector<AdapterCheckpoint> one = {pool[0]};
        CHECK_THROWS_AS(select_conflict_layers(0, one, 1), Error);
    }
}

namespace {

FsdMatrix matrix_for(const std::vector<AdapterCheckpoint>& pool,
                     const std::vector<std::string>& names) {
    return fsd_matrix(pool, names);
}

}  // namespace

TEST_CASE("sparse_mix") {
    std::vector<AdapterCheckpoint> pool;
    std::vector<std::string> names;
    for (int i = 0; i < 4; ++i) {
        pool.push_back(testutil::random_checkpoint(800 + i, 4, 25, "s" + std::to_string(i)));
        names.push_back("s" + std::to_string(i));
    }
    const FsdMatrix matrix = matrix_for(pool, names);

    SUBCASE("l=1, s=0 returns the lowest-mean-FSD adapter bitwise") {
        const SparseMixResult result = sparse_mix(pool, matrix, 1, 2, 0.0);
        REQUIRE(result.selected.size() == 1);
        const int idx = result.selected[0];
        const auto means = mean_fsd_rows(matrix);
        for (std::size_t j = 0; j < means.size(); ++j) {
            CHECK(means[idx] <= means[j]);
        }
        CHECK(tensors_bitwise_equal(result.mixed, pool[idx]));
    }
    SUBCASE("l=2, m=all, s=0 reduces to greedy (dense) mixing") {
        const SparseMixResult result = sparse_mix(pool, matrix, 2, 4, 0.0, ConflictPool::Selected,
                                                  names);
        const GreedySelection greedy = greedy_mix(pool, matrix, 2, names);
        CHECK(result.selected == greedy.selected);
        CHECK(tensors_bitwise_equal(result.mixed, greedy.mixed));
    }
    SUBCASE("composition oracle: select -> prune -> average, each step independent") {
        const int l = 2, m = 1;
        const double s = 0.9;
        const SparseMixResult result = sparse_mix(pool, matrix, l, m, s, ConflictPool::Selected,
                                                  names);

        // step 1: selection by smallest mean row
        const std::vector<int> expected_sel = select_smallest_mean_fsd(matrix, l);
        CHECK(result.selected == expected_sel);

        // steps 2+3: prune each selected adapter's single highest-conflict
        // tensor (scores among the selected set), then average
        std::vector<AdapterCheckpoint> selected;
        std::vector<std::string> sel_names;
        for (int idx : expected_sel) {
            selected.push_back(pool[idx]);
            sel_names.push_back(names[idx]);
        }
        std::vector<AdapterCheckpoint> sparse;
        for (std::size_t i = 0; i < selected.size(); ++i) {
            const auto layers = select_conflict_layers(i, selected, m);
            AdapterCheckpoint pruned = selected[i];
            const PruneResult full = magnitude_prune(selected[i], s);
            for (const auto& layer : layers) {
                pruned.tensors.at(layer) = full.adapter.tensors.at(layer);
            }
            sparse.push_back(std::move(pruned));
        }
        const AdapterCheckpoint expected_mix = mix_uniform(sparse, sel_names);
        CHECK(tensors_bitwise_equal(result.mixed, expected_mix));

        // sanity: pruned tensors really are sparse in the mixed output metadata
        CHECK(result.mixed.metadata.at("mix.method") == "sparse");
    }
    SUBCASE("parameter bounds") {
        CHECK_THROWS_AS(sparse_mix(pool, matrix, 0, 1, 0.5), Error);
        CHECK_THROWS_AS(sparse_mix(pool, matrix, 5, 1, 0.5), Error);
        CHECK_THROWS_AS(sparse_mix(pool, matrix, 2, 0, 0.5), Error);
        CHECK_THROWS_AS(sparse_mix(pool, matrix, 2, 5, 0.5), Error);
        CHECK_THROWS_AS(sparse_mix(pool, matrix, 2, 1, 1.0), Error);
    }
}
