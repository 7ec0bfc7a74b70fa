// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mixer/checkpoint.hpp"
#include "mixer/fsd.hpp"

namespace mixer {

enum class PruneScope { PerTensor, Global };
enum class ConflictPool { Selected, All };

/// Keep/drop flags aligned with each tensor's flat data (1 = kept).
struct PruneMask {
    std::map<std::string, std::vector<std::uint8_t>> keep;

    std::uint64_t kept_count(const std::string& tensor) const;
};

struct PruneResult {
    AdapterCheckpoint adapter;
    PruneMask mask;
};

/// Magnitude pruning: within each scope unit, zeroes exactly floor(s*n) of
/// the smallest-|w| elements. Ties at the cut keep the lower flat index
/// (global scope orders tensors by name). Survivors keep their exact bits.
/// Output metadata records the sparsity and scope.
PruneResult magnitude_prune(const AdapterCheckpoint& adapter, double sparsity,
                            PruneScope scope = PruneScope::PerTensor);

/// For adapters[adapter_index], scores every tensor by its sign-conflict
/// fraction averaged over all other adapters, and returns the m names with
/// the highest score (ties: lexicographically smaller name first).
std::vector<std::string> select_conflict_layers(std::size_t adapter_index,
                                                std::span<const AdapterCheckpoint> adapters,
                                                std::size_t m);

struct SparseMixResult {
    AdapterCheckpoint mixed;
    std::vector<int> selected;
};

/// Sparse mixing: select l adapters by smallest mean row FSD, prune each
/// selected adapter's m highest-conflict tensors to sparsity s (conflict
/// scores computed among the selected set by default), then average.
SparseMixResult sparse_mix(std::span<const AdapterCheckpoint> adapters, const FsdMatrix& s_matrix,
                           int l, int m, double sparsity,
                           ConflictPool pool = ConflictPool::Selected,
                           std::span<const std::string> names = {});

/// Mask JSON: {tensor-name: [run lengths]}, runs alternating keep/drop and
/// starting with a keep run (which may be 0).
void write_mask_json(const PruneMask& mask, const std::filesystem::path& path);
PruneMask read_mask_json(const std::filesystem::path& path);

}  // namespace mixer
