// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixer/fsd.hpp"
#include "mixer/toy_train.hpp"

namespace mixer::toy {

/// One trained domain: its data, the trained model, and the adapter/head
/// checkpoints extracted from it.
struct TrainedDomain {
    DomainDataset data;
    ToyModel model;
    AdapterCheckpoint adapter;
    AdapterCheckpoint head;
};

/// Trains one adapter per domain on a shared frozen backbone. The trainable
/// init is shared across domains (same cfg.seed), so weight divergence — and
/// therefore FSD — reflects the data alone. `run_seed` re-keys both the data
/// and the training streams, giving independent replications.
std::vector<TrainedDomain> train_domains(std::span<const DomainSpec> specs,
                                         const TrainConfig& cfg, std::uint64_t run_seed,
                                         const ToyModel& backbone);

/// Accuracy of the uniform mixture of `members` adapters on the target's
/// test split, decided by the target's own head.
double evaluate_mixture(const ToyModel& backbone, std::span<const TrainedDomain> domains,
                        std::span<const int> members, int target,
                        std::optional<double> fgsm_eps = std::nullopt);

struct CorrelationConfig {
    std::vector<DomainSpec> domains;
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::optional<double> fgsm_eps;
    std::uint64_t backbone_seed = 7;
    int threads = 1;
};

/// One evaluated mixture: members (pool indices, ascending, containing the
/// target), the mean pairwise FSD among them, and accuracies on the target.
struct MixtureRecord {
    std::uint64_t seed = 0;
    int target = 0;
    std::vector<int> members;
    double fsd_mean = 0.0;
    double clean_acc = 0.0;
    double fgsm_acc = std::numeric_limits<double>::quiet_NaN();
};

struct CorrelationReport {
    struct PerTarget {
        std::string target;
        double spearman;  // NaN when undefined (constant inputs)
        int n_pairs;
    };
    std::vector<PerTarget> per_target;   // rank correlation over k=2 mixtures
    double pooled_spearman = 0.0;
    std::vector<double> per_k_mean_acc;  // index 0 holds k=1
    std::vector<MixtureRecord> rows;     // the full evaluation table
};

/// Trains all domains for every seed, evaluates every subset containing each
/// target, and correlates pairwise FSD against the pair mixtures' in-domain
/// accuracy (Spearman per target and pooled).
CorrelationReport correlation_experiment(const CorrelationConfig& cfg);

void write_correlation_json(const CorrelationReport& report, const std::filesystem::path& path);

}  // namespace mixer::toy
