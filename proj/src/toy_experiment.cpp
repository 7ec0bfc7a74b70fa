// SPDX-License-Identifier: Apache-2.0
#include "mixer/toy_experiment.hpp"

#include <cmath>
#include <map>

#include <json.hpp>

#include "mixer/error.hpp"
#include "mixer/io.hpp"
#include "mixer/mix.hpp"
#include "mixer/parallel.hpp"
#include "mixer/rng.hpp"
#include "mixer/stats.hpp"

namespace mixer::toy {

using json = nlohmann::json;

std::vector<TrainedDomain> train_domains(std::span<const DomainSpec> specs,
                                         const TrainConfig& cfg, std::uint64_t run_seed,
                                         const ToyModel& backbone) {
    std::vector<TrainedDomain> out(specs.size());
    TrainConfig run_cfg = cfg;
    run_cfg.seed = mix_seed(cfg.seed, run_seed);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        DomainSpec spec = specs[i];
        spec.seed = mix_seed(spec.seed, run_seed);
        out[i].data = make_domain(spec);
        TrainResult trained = train_adapter(backbone, out[i].data, run_cfg);
        out[i].model = std::move(trained.model);
        out[i].adapter = std::move(trained.adapter);
        out[i].head = std::move(trained.head);
    }
    return out;
}

double evaluate_mixture(const ToyModel& backbone, std::span<const TrainedDomain> domains,
                        std::span<const int> members, int target,
                        std::optional<double> fgsm_eps) {
    std::vector<AdapterCheckpoint> adapters;
    std::vector<std::string> names;
    adapters.reserve(members.size());
    for (int idx : members) {
        adapters.push_back(domains[idx].adapter);
        names.push_back(domains[idx].data.spec.id);
    }
    const AdapterCheckpoint mixed = mix_uniform(adapters, names);

    ToyModel model = backbone;
    model.input_dim = domains[target].data.spec.input_dim;
    model.num_classes = domains[target].data.spec.num_classes;
    load_adapter(model, mixed);
    load_head(model, domains[target].head);
    return evaluate(model, domains[target].data.test, fgsm_eps);
}

CorrelationReport correlation_experiment(const CorrelationConfig& cfg) {
    if (cfg.domains.size() < 3) {
        throw Error("correlation experiment requires at least 3 domains");
    }
    if (cfg.seeds.empty()) {
        throw Error("correlation experiment requires at least one seed");
    }
    for (const auto& spec : cfg.domains) {
        spec.validate();
    }
    const int n = static_cast<int>(cfg.domains.size());

    const ToyModel backbone = ToyModel::make(cfg.domains[0].input_dim,
                                             cfg.domains[0].num_classes, cfg.backbone_seed,
                                             /*trainable_seed=*/0);

    CorrelationReport report;
    std::vector<std::vector<double>> per_k_acc(n);

    for (const std::uint64_t seed : cfg.seeds) {
        const std::vector<TrainedDomain> domains =
            train_domains(cfg.domains, cfg.train, seed, backbone);

        std::vector<AdapterCheckpoint> adapters;
        std::vector<std::string> labels;
        for (const auto& d : domains) {
            adapters.push_back(d.adapter);
            labels.push_back(d.data.spec.id);
        }
        const FsdMatrix fsd = fsd_matrix(adapters, labels, cfg.threads);

        // every subset containing each target, all sizes
        std::vector<MixtureRecord> seed_rows;
        for (int target = 0; target < n; ++target) {
            for (const MixtureSpec& spec : enumerate_mixtures(target, n)) {
                MixtureRecord row;
                row.seed = seed;
                row.target = target;
                row.members = spec.members;
                double fsd_sum = 0.0;
                int pairs = 0;
                for (std::size_t a = 0; a < spec.members.size(); ++a) {
                    for (std::size_t b = a + 1; b < spec.members.size(); ++b) {
                        fsd_sum += fsd.at(spec.members[a], spec.members[b]);
                        ++pairs;
                    }
                }
                row.fsd_mean = pairs == 0 ? 0.0 : fsd_sum / pairs;
                seed_rows.push_back(std::move(row));
            }
        }
        parallel_for(seed_rows.size(), cfg.threads, [&](std::size_t r) {
            MixtureRecord& row = seed_rows[r];
            row.clean_acc = evaluate_mixture(backbone, domains, row.members, row.target);
            if (cfg.fgsm_eps) {
                row.fgsm_acc =
                    evaluate_mixture(backbone, domains, row.members, row.target, cfg.fgsm_eps);
            }
        });
        for (MixtureRecord& row : seed_rows) {
            per_k_acc[row.members.size() - 1].push_back(row.clean_acc);
            report.rows.push_back(std::move(row));
        }
    }

    // Spearman over the k=2 mixtures: pairwise FSD vs in-domain accuracy
    std::vector<double> pooled_fsd, pooled_acc;
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> per_target;
    for (const MixtureRecord& row : report.rows) {
        if (row.members.size() != 2) {
            continue;
        }
        pooled_fsd.push_back(row.fsd_mean);
        pooled_acc.push_back(row.clean_acc);
        per_target[row.target].first.push_back(row.fsd_mean);
        per_target[row.target].second.push_back(row.clean_acc);
    }
    report.pooled_spearman = spearman(pooled_fsd, pooled_acc);
    for (const auto& [target, series] : per_target) {
        CorrelationReport::PerTarget entry;
        entry.target = cfg.domains[target].id;
        entry.spearman = spearman(series.first, series.second);
        entry.n_pairs = static_cast<int>(series.first.size());
        report.per_target.push_back(std::move(entry));
    }

    report.per_k_mean_acc.resize(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double sum = 0.0;
        for (double a : per_k_acc[k]) {
            sum += a;
        }
        report.per_k_mean_acc[k] = per_k_acc[k].empty() ? 0.0 : sum / per_k_acc[k].size();
    }
    return report;
}

void write_correlation_json(const CorrelationReport& report, const std::filesystem::path& path) {
    auto number_or_null = [](double v) {
        return std::isfinite(v) ? json(v) : json(nullptr);
    };

    json per_target = json::array();
    for (const auto& entry : report.per_target) {
        per_target.push_back({{"target", entry.target},
                              {"spearman", number_or_null(entry.spearman)},
                              {"n_pairs", entry.n_pairs}});
    }
    json rows = json::array();
    for (const auto& row : report.rows) {
        json r = {{"seed", row.seed},
                  {"target", row.target},
                  {"members", row.members},
                  {"fsd_mean", row.fsd_mean},
                  {"clean_acc", row.clean_acc}};
        if (std::isfinite(row.fgsm_acc)) {
            r["fgsm_acc"] = row.fgsm_acc;
        }
        rows.push_back(std::move(r));
    }
    const json doc = {{"per_target", per_target},
                      {"pooled_spearman", number_or_null(report.pooled_spearman)},
                      {"per_k_mean_acc", report.per_k_mean_acc},
                      {"rows", rows}};
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace mixer::toy
