// SPDX-License-Identifier: Apache-2.0
#include "mixer/mix.hpp"

#include <algorithm>
#include <numeric>

#include "mixer/error.hpp"

namespace mixer {

namespace {

std::string member_key(std::span<const AdapterCheckpoint> adapters,
                       std::span<const std::string> names, std::size_t i) {
    if (!names.empty()) {
        return names[i];
    }
    return adapters[i].name();
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

}  // namespace

AdapterCheckpoint mix_uniform(std::span<const AdapterCheckpoint> adapters,
                              std::span<const std::string> names) {
    if (adapters.empty()) {
        throw Error("mix_uniform requires at least one adapter (k >= 1)");
    }
    if (!names.empty() && names.size() != adapters.size()) {
        throw Error("mix_uniform: name count does not match adapter count");
    }
    require_compatible(adapters);

    // Canonical member order: sort by display name, stable on input position.
    std::vector<std::size_t> order(adapters.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return member_key(adapters, names, a) < member_key(adapters, names, b);
    });

    const double k = static_cast<double>(adapters.size());
    AdapterCheckpoint out;
    for (const auto& [name, base] : adapters[0].tensors) {
        Tensor t;
        t.shape = base.shape;
        t.data.resize(base.data.size());
        std::vector<double> acc(base.data.size(), 0.0);
        for (std::size_t idx : order) {
            const Tensor& member = adapters[idx].tensors.at(name);
            for (std::size_t e = 0; e < acc.size(); ++e) {
                acc[e] += static_cast<double>(member.data[e]);
            }
        }
        for (std::size_t e = 0; e < acc.size(); ++e) {
            t.data[e] = static_cast<float>(acc[e] / k);
        }
        out.tensors.emplace(name, std::move(t));
    }

    std::vector<std::string> member_names;
    member_names.reserve(order.size());
    for (std::size_t idx : order) {
        std::string key = member_key(adapters, names, idx);
        member_names.push_back(key.empty() ? "#" + std::to_string(idx) : std::move(key));
    }
    out.metadata["mix.method"] = "uniform";
    out.metadata["mix.k"] = std::to_string(adapters.size());
    out.metadata["mix.members"] = join(member_names, ';');
    return out;
}

std::uint64_t count_all_mixtures(int pool_size) {
    if (pool_size < 1 || pool_size > 30) {
        throw Error("count_all_mixtures: pool_size must be in [1, 30]");
    }
    return static_cast<std::uint64_t>(pool_size) << (pool_size - 1);
}

std::vector<MixtureSpec> enumerate_mixtures(int target, int pool_size, std::optional<int> k) {
    if (pool_size < 1) {
        throw Error("enumerate_mixtures: pool_size must be >= 1");
    }
    if (target < 0 || target >= pool_size) {
        throw Error("enumerate_mixtures: target out of range");
    }
    if (k && (*k < 1 || *k > pool_size)) {
        throw Error("enumerate_mixtures: k out of range");
    }

    std::vector<int> others;
    for (int i = 0; i < pool_size; ++i) {
        if (i != target) {
            others.push_back(i);
        }
    }

    std::vector<MixtureSpec> out;
    const int k_lo = k ? *k : 1;
    const int k_hi = k ? *k : pool_size;
    for (int size = k_lo; size <= k_hi; ++size) {
        const int choose = size - 1;  // companions besides the target
        // lexicographic combinations of `others`
        std::vector<int> idx(choose);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            MixtureSpec spec;
            spec.method = MixMethod::Uniform;
            spec.members.reserve(size);
            for (int i : idx) {
                spec.members.push_back(others[i]);
            }
            spec.members.push_back(target);
            std::sort(spec.members.begin(), spec.members.end());
            out.push_back(std::move(spec));

            // advance to next combination
            int pos = choose - 1;
            while (pos >= 0 && idx[pos] == static_cast<int>(others.size()) - choose + pos) {
                --pos;
            }
            if (pos < 0) {
                break;
            }
            ++idx[pos];
            for (int j = pos + 1; j < choose; ++j) {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    return out;
}

std::vector<int> select_smallest_mean_fsd(const FsdMatrix& s, int l) {
    if (l < 1 || static_cast<std::size_t>(l) > s.k) {
        throw Error("selection size l must be in [1, k]");
    }
    const std::vector<double> means = mean_fsd_rows(s);
    std::vector<int> order(s.k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (means[a] != means[b]) {
            return means[a] < means[b];
        }
        return a < b;  // tie: lower index first
    });
    std::vector<int> selected(order.begin(), order.begin() + l);
    std::sort(selected.begin(), selected.end());
    return selected;
}

void require_labels_aligned(std::span<const AdapterCheckpoint> adapters, const FsdMatrix& s,
                            std::span<const std::string> names) {
    if (s.k != adapters.size()) {
        throw Error("FSD matrix size does not match adapter count");
    }
    if (!names.empty() && names.size() != adapters.size()) {
        throw Error("name count does not match adapter count");
    }
    for (std::size_t i = 0; i < adapters.size(); ++i) {
        const std::string key = names.empty() ? adapters[i].name() : names[i];
        if (!key.empty() && key != s.labels[i]) {
            throw Error("FSD matrix label '" + s.labels[i] + "' does not match adapter '" +
                        key + "' at index " + std::to_string(i));
        }
    }
}

GreedySelection greedy_mix(std::span<const AdapterCheckpoint> adapters, const FsdMatrix& s,
                           int l, std::span<const std::string> names) {
    require_labels_aligned(adapters, s, names);
    GreedySelection result;
    result.selected = select_smallest_mean_fsd(s, l);

    std::vector<AdapterCheckpoint> chosen;
    std::vector<std::string> chosen_names;
    chosen.reserve(result.selected.size());
    for (int idx : result.selected) {
        chosen.push_back(adapters[idx]);
        chosen_names.push_back(names.empty() ? adapters[idx].name() : names[idx]);
    }
    result.mixed = mix_uniform(chosen, chosen_names);
    result.mixed.metadata["mix.method"] = "greedy";
    result.mixed.metadata["mix.l"] = std::to_string(l);
    return result;
}

}  // namespace mixer
