// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixer/tensor.hpp"

namespace mixer {

/// A named set of adapter tensors plus string metadata. Immutable by
/// convention after load; safe to share read-only across threads.
///
/// File layout (bit-exact, compatible with the common single-file tensor
/// convention so externally produced adapters can be ingested):
///   bytes 0..7    little-endian u64 header length H
///   bytes 8..8+H  UTF-8 JSON: {name: {"dtype":"F32","shape":[...],
///                 "data_offsets":[begin,end]}, ..., "__metadata__":{...}}
///                 offsets are relative to byte 8+H
///   rest          raw little-endian float32 payloads, contiguous,
///                 in lexicographically sorted name order, no padding
struct AdapterCheckpoint {
    std::map<std::string, Tensor> tensors;             // sorted by name
    std::map<std::string, std::string> metadata;       // always carries format_version="1"

    AdapterCheckpoint() { metadata["format_version"] = "1"; }

    /// Total parameter count s across all tensors.
    std::uint64_t param_count() const;

    /// Display name ("name" metadata key) or empty string.
    std::string name() const;

    /// Throws Error if any invariant is violated (bad shapes, non-finite
    /// values, empty names, s == 0, unsupported format_version).
    void validate() const;
};

struct CompatReport {
    enum class Reason { Missing, ShapeMismatch };
    struct Mismatch {
        std::string tensor;
        Reason reason;
        std::size_t checkpoint_index;  // which input disagrees with input 0
    };
    bool compatible = true;
    std::vector<Mismatch> mismatches;
};

/// Parses a checkpoint file. Errors: malformed header length, header not
/// valid JSON, overlapping or out-of-bounds data ranges, dtype other than
/// F32, non-finite values.
AdapterCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Canonical serialization: sorted tensor names, contiguous payload in name
/// order, compact JSON header with sorted keys. Same logical checkpoint
/// always produces the same bytes.
std::string serialize_checkpoint(const AdapterCheckpoint& ckpt);

/// Validates, serializes canonically, and writes atomically.
void save_checkpoint(const AdapterCheckpoint& ckpt, const std::filesystem::path& path);

/// All checkpoints must share the same tensor names and per-name shapes.
/// Mismatches are reported against the first checkpoint; requires >= 2 inputs.
CompatReport validate_compat(std::span<const AdapterCheckpoint> ckpts);

/// Throws Error naming the first offending tensor if the pair is incompatible.
void require_compatible(const AdapterCheckpoint& a, const AdapterCheckpoint& b);
void require_compatible(std::span<const AdapterCheckpoint> ckpts);

/// Tensor payloads identical bit for bit (names, shapes, data). Ignores
/// metadata; see operator== for full equality.
bool tensors_bitwise_equal(const AdapterCheckpoint& a, const AdapterCheckpoint& b);

bool operator==(const AdapterCheckpoint& a, const AdapterCheckpoint& b);

}  // namespace mixer
