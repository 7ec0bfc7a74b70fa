// SPDX-License-Identifier: Apache-2.0
#include "mixer/prune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "mixer/error.hpp"
#include "mixer/format.hpp"
#include "mixer/io.hpp"
#include "mixer/mix.hpp"

namespace mixer {

using json = nlohmann::json;

std::uint64_t PruneMask::kept_count(const std::string& tensor) const {
    const auto it = keep.find(tensor);
    if (it == keep.end()) {
        return 0;
    }
    std::uint64_t n = 0;
    for (std::uint8_t k : it->second) {
        n += k;
    }
    return n;
}

namespace {

// floor(s*n) guarded against double roundoff (0.7*10 evaluates below 7).
std::uint64_t drop_count(double sparsity, std::uint64_t n) {
    return static_cast<std::uint64_t>(std::floor(sparsity * static_cast<double>(n) + 1e-9));
}

// Flat position inside one scope unit (tensor index only used by Global).
struct Slot {
    float magnitude;
    std::size_t tensor;
    std::size_t index;
};

// Prune priority: smallest magnitude first; among equal magnitudes the
// higher index goes first, so the lower flat index survives.
bool prune_before(const Slot& a, const Slot& b) {
    if (a.magnitude != b.magnitude) {
        return a.magnitude < b.magnitude;
    }
    if (a.tensor != b.tensor) {
        return a.tensor > b.tensor;
    }
    return a.index > b.index;
}

}  // namespace

PruneResult magnitude_prune(const AdapterCheckpoint& adapter, double sparsity, PruneScope scope) {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw Error("sparsity must be in [0, 1)");
    }
    adapter.validate();

    PruneResult result;
    result.adapter = adapter;

    std::vector<const std::string*> tensor_names;
    for (const auto& [name, tensor] : adapter.tensors) {
        tensor_names.push_back(&name);
        result.mask.keep[name].assign(tensor.size(), 1);
    }

    auto apply_drop = [&](std::span<const Slot> slots, std::uint64_t drop) {
        for (std::uint64_t i = 0; i < drop; ++i) {
            const Slot& s = slots[i];
            const std::string& name = *tensor_names[s.tensor];
            result.adapter.tensors.at(name).data[s.index] = 0.0f;
            result.mask.keep.at(name)[s.index] = 0;
        }
    };

    if (scope == PruneScope::PerTensor) {
        for (std::size_t t = 0; t < tensor_names.size(); ++t) {
            const Tensor& tensor = adapter.tensors.at(*tensor_names[t]);
            std::vector<Slot> slots(tensor.size());
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                slots[i] = {std::fabs(tensor.data[i]), t, i};
            }
            const std::uint64_t drop = drop_count(sparsity, tensor.size());
            std::nth_element(slots.begin(), slots.begin() + drop, slots.end(), prune_before);
            apply_drop(slots, drop);
        }
    } else {
        std::vector<Slot> slots;
        slots.reserve(adapter.param_count());
        for (std::size_t t = 0; t < tensor_names.size(); ++t) {
            const Tensor& tensor = adapter.tensors.at(*tensor_names[t]);
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                slots.push_back({std::fabs(tensor.data[i]), t, i});
            }
        }
        const std::uint64_t drop = drop_count(sparsity, slots.size());
        std::nth_element(slots.begin(), slots.begin() + drop, slots.end(), prune_before);
        apply_drop(slots, drop);
    }

    result.adapter.metadata["prune.sparsity"] = double_repr(sparsity);
    result.adapter.metadata["prune.scope"] =
        scope == PruneScope::PerTensor ? "per-tensor" : "global";
    return result;
}

std::vector<std::string> select_conflict_layers(std::size_t adapter_index,
                                                std::span<const AdapterCheckpoint> adapters,
                                                std::size_t m) {
    if (adapters.size() < 2) {
        throw Error("select_conflict_layers requires at least 2 adapters");
    }
    if (adapter_index >= adapters.size()) {
        throw Error("select_conflict_layers: adapter index out of range");
    }
    const auto& target = adapters[adapter_index];
    if (m < 1 || m > target.tensors.size()) {
        throw Error("layer count m must be in [1, tensor count]");
    }
    require_compatible(adapters);

    // Exact integer accumulation: summed conflict counts per tensor. The mean
    // fraction is count / (n * others) with the same denominator factor
    // `others` everywhere, so ranking only needs count/n compared exactly by
    // cross-multiplication.
    std::map<std::string, std::uint64_t> counts;
    for (std::size_t j = 0; j < adapters.size(); ++j) {
        if (j == adapter_index) {
            continue;
        }
        for (const auto& [name, tensor] : target.tensors) {
            counts[name] += count_sign_conflicts(tensor, adapters[j].tensors.at(name));
        }
    }

    std::vector<std::string> names;
    for (const auto& [name, tensor] : target.tensors) {
        names.push_back(name);
    }
    std::sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
        const auto lhs = static_cast<unsigned __int128>(counts[a]) * target.tensors.at(b).size();
        const auto rhs = static_cast<unsigned __int128>(counts[b]) * target.tensors.at(a).size();
        if (lhs != rhs) {
            return lhs > rhs;  // highest conflict fraction first
        }
        return a < b;  // tie: lexicographically smaller name
    });
    names.resize(m);
    return names;
}

SparseMixResult sparse_mix(std::span<const AdapterCheckpoint> adapters, const FsdMatrix& s_matrix,
                           int l, int m, double sparsity, ConflictPool pool,
                           std::span<const std::string> names) {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw Error("sparsity must be in [0, 1)");
    }
    require_labels_aligned(adapters, s_matrix, names);
    const std::size_t tensor_count = adapters.empty() ? 0 : adapters[0].tensors.size();
    if (m < 1 || static_cast<std::size_t>(m) > tensor_count) {
        throw Error("layer count m must be in [1, tensor count]");
    }

    SparseMixResult result;
    result.selected = select_smallest_mean_fsd(s_matrix, l);

    std::vector<AdapterCheckpoint> dense;
    std::vector<std::string> dense_names;
    for (int idx : result.selected) {
        dense.push_back(adapters[idx]);
        dense_names.push_back(names.empty() ? adapters[idx].name() : names[idx]);
    }

    // Conflict scores are computed among the set actually being averaged
    // (the selected set) unless the caller asks for the whole pool.
    std::vector<AdapterCheckpoint> sparse;
    sparse.reserve(dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i) {
        std::vector<std::string> to_prune;
        if (pool == ConflictPool::All) {
            to_prune = select_conflict_layers(static_cast<std::size_t>(result.selected[i]),
                                              adapters, static_cast<std::size_t>(m));
        } else if (dense.size() >= 2) {
            to_prune = select_conflict_layers(i, dense, static_cast<std::size_t>(m));
        } else {
            // singleton selection: no partners, so all scores tie at zero
            for (const auto& [name, tensor] : dense[i].tensors) {
                to_prune.push_back(name);
                if (to_prune.size() == static_cast<std::size_t>(m)) {
                    break;
                }
            }
        }

        AdapterCheckpoint pruned = dense[i];
        const PruneResult full = magnitude_prune(dense[i], sparsity, PruneScope::PerTensor);
        for (const auto& name : to_prune) {
            pruned.tensors.at(name) = full.adapter.tensors.at(name);
        }
        sparse.push_back(std::move(pruned));
    }

    result.mixed = mix_uniform(sparse, dense_names);
    result.mixed.metadata["mix.method"] = "sparse";
    result.mixed.metadata["mix.l"] = std::to_string(l);
    result.mixed.metadata["mix.m"] = std::to_string(m);
    result.mixed.metadata["mix.sparsity"] = double_repr(sparsity);
    return result;
}

void write_mask_json(const PruneMask& mask, const std::filesystem::path& path) {
    json out = json::object();
    for (const auto& [name, keep] : mask.keep) {
        std::vector<std::uint64_t> runs;
        std::uint8_t current = 1;  // runs start with a keep run, possibly 0
        std::uint64_t length = 0;
        for (std::uint8_t k : keep) {
            if (k == current) {
                ++length;
            } else {
                runs.push_back(length);
                current = k;
                length = 1;
            }
        }
        runs.push_back(length);
        if (keep.empty()) {
            runs.clear();
        }
        out[name] = runs;
    }
    write_file_atomic(path, out.dump());
}

PruneMask read_mask_json(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    json in;
    try {
        in = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error("'" + path.string() + "': mask not valid JSON: " + e.what());
    }
    if (!in.is_object()) {
        throw Error("'" + path.string() + "': mask must be a JSON object");
    }
    PruneMask mask;
    for (const auto& [name, runs] : in.items()) {
        if (!runs.is_array()) {
            throw Error("'" + path.string() + "': runs for '" + name + "' must be an array");
        }
        std::vector<std::uint8_t> keep;
        std::uint8_t current = 1;
        for (const auto& r : runs) {
            if (!r.is_number_unsigned()) {
                throw Error("'" + path.string() + "': run lengths must be non-negative integers");
            }
            keep.insert(keep.end(), r.get<std::uint64_t>(), current);
            current = current ? 0 : 1;
        }
        mask.keep[name] = std::move(keep);
    }
    return mask;
}

}  // namespace mixer
