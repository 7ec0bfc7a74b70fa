// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixer/checkpoint.hpp"
#include "mixer/fsd.hpp"

namespace mixer {

enum class MixMethod { Uniform, Greedy, Sparse };

/// One mixture to evaluate: which pool members, produced how.
struct MixtureSpec {
    std::vector<int> members;  // distinct, ascending pool indices
    MixMethod method = MixMethod::Uniform;
    int l = 0;
    int m = 0;
    double sparsity = 0.0;
};

/// Elementwise arithmetic mean of compatible adapters. Accumulation is done
/// in 64-bit floats over members re-sorted into canonical name order, then
/// divided by k and rounded once to f32 — bit-deterministic for any input
/// permutation of the same named members. Output metadata records the member
/// names and k. `names` may be empty, in which case members are keyed by
/// their own "name" metadata (possibly empty, ties broken by input position).
AdapterCheckpoint mix_uniform(std::span<const AdapterCheckpoint> adapters,
                              std::span<const std::string> names = {});

/// Number of (target, subset containing the target) pairs over a pool:
/// n * 2^(n-1). Exact; pool_size must be in [1, 30].
std::uint64_t count_all_mixtures(int pool_size);

/// Every subset of the pool that contains `target`, of size k (or of every
/// size when k is absent, sizes ascending), each in lexicographic index
/// order. Deterministic.
std::vector<MixtureSpec> enumerate_mixtures(int target, int pool_size,
                                            std::optional<int> k = std::nullopt);

/// Indices of the l smallest mean-FSD rows, ties broken by the lower index,
/// returned in ascending order.
std::vector<int> select_smallest_mean_fsd(const FsdMatrix& s, int l);

struct GreedySelection {
    std::vector<int> selected;
    AdapterCheckpoint mixed;
};

/// Greedy adapter mixing: pick the l adapters with the smallest average FSD
/// and average them. Matrix labels must align with the adapter names.
GreedySelection greedy_mix(std::span<const AdapterCheckpoint> adapters, const FsdMatrix& s,
                           int l, std::span<const std::string> names = {});

/// Throws unless s.labels[i] matches names[i] (or adapters[i]'s own name)
/// for every i. Used by greedy and sparse mixing.
void require_labels_aligned(std::span<const AdapterCheckpoint> adapters, const FsdMatrix& s,
                            std::span<const std::string> names);

}  // namespace mixer
