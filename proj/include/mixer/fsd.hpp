// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mixer/checkpoint.hpp"

namespace mixer {

/// Symmetric k x k matrix of sign-difference fractions with a zero diagonal.
struct FsdMatrix {
    std::vector<std::string> labels;
    std::size_t k = 0;
    std::vector<double> values;  // row-major k*k

    double at(std::size_t i, std::size_t j) const { return values[i * k + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * k + j]; }

    /// Zero diagonal, symmetry, entries in [0,1]. Throws Error on violation.
    void validate() const;
};

/// Exact number of aligned positions whose elementwise product is strictly
/// negative. Zeros never conflict.
std::uint64_t count_sign_conflicts(const Tensor& a, const Tensor& b);

/// Fraction of sign-conflicting positions over the total parameter count s.
/// Counting is exact integer arithmetic; only the final division is floating
/// point. Requires compatible checkpoints.
double fsd_pair(const AdapterCheckpoint& a, const AdapterCheckpoint& b);

/// Per-tensor conflict fraction, normalized by each tensor's element count.
std::map<std::string, double> fsd_per_tensor(const AdapterCheckpoint& a,
                                             const AdapterCheckpoint& b);

/// Pairwise FSD over a pool of adapters. Pairs may be computed in parallel;
/// the result is deterministic regardless of thread count.
FsdMatrix fsd_matrix(std::span<const AdapterCheckpoint> adapters,
                     std::vector<std::string> labels, int threads = 1);

/// Row means including the zero diagonal (divides by k, not k-1). The induced
/// ranking is unchanged either way; this keeps reported numbers reproducible.
std::vector<double> mean_fsd_rows(const FsdMatrix& s);

/// CSV with a header row of labels, then k rows of k fractions printed with
/// 9 fixed decimal digits.
void write_fsd_csv(const FsdMatrix& s, const std::filesystem::path& path);
FsdMatrix read_fsd_csv(const std::filesystem::path& path);

}  // namespace mixer
