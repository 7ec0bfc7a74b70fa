// SPDX-License-Identifier: Apache-2.0
#include "mixer/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixer/checkpoint.hpp"
#include "mixer/error.hpp"
#include "mixer/format.hpp"
#include "mixer/fsd.hpp"
#include "mixer/io.hpp"
#include "mixer/mix.hpp"
#include "mixer/parallel.hpp"
#include "mixer/prune.hpp"
#include "mixer/report.hpp"
#include "mixer/sha256.hpp"
#include "mixer/stats.hpp"
#include "mixer/toy_bundle.hpp"
#include "mixer/toy_experiment.hpp"
#include "mixer/version.hpp"

namespace mixer::cli {

using json = nlohmann::json;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string file_digest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return Sha256::of(bytes.data(), bytes.size());
}

std::string path_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

/// Collects everything a manifest needs while a command runs.
struct ManifestBuilder {
    std::vector<std::string> command_line;
    json config = json::object();
    std::vector<std::uint64_t> seeds;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;

    void add_input(const std::filesystem::path& path) { inputs[path.string()] = file_digest(path); }
    void add_output(const std::filesystem::path& path) {
        outputs[path.string()] = file_digest(path);
    }

    /// Writes <primary_output>.manifest.json.
    void write(const std::filesystem::path& primary_output) const {
        RunManifest manifest;
        manifest.artifact_version = kArtifactVersion;
        manifest.command_line = command_line;
        manifest.config_digest = Sha256::of(config.dump());
        manifest.seeds = seeds;
        manifest.input_digests = inputs;
        manifest.output_digests = outputs;
        manifest.timestamp = utc_timestamp();
        write_manifest(manifest, primary_output.string() + ".manifest.json");
    }
};

struct LoadedPool {
    std::vector<AdapterCheckpoint> adapters;
    std::vector<std::string> names;  // file stems
};

LoadedPool load_inputs(const std::vector<std::string>& paths, ManifestBuilder& manifest) {
    LoadedPool pool;
    for (const auto& p : paths) {
        pool.adapters.push_back(load_checkpoint(p));
        pool.names.push_back(path_stem(p));
        manifest.add_input(p);
    }
    return pool;
}

/// Reorders a stored FSD matrix so row i matches names[i]. Every name must
/// resolve to exactly one matrix label.
FsdMatrix align_matrix(const FsdMatrix& stored, const std::vector<std::string>& names) {
    if (stored.k != names.size()) {
        throw Error("FSD matrix has " + std::to_string(stored.k) + " labels but " +
                    std::to_string(names.size()) + " adapters were given");
    }
    std::vector<std::size_t> pos(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::size_t found = stored.k;
        for (std::size_t j = 0; j < stored.k; ++j) {
            if (stored.labels[j] == names[i]) {
                if (found != stored.k) {
                    throw Error("FSD matrix label '" + names[i] + "' is ambiguous");
                }
                found = j;
            }
        }
        if (found == stored.k) {
            throw Error("FSD matrix has no label '" + names[i] + "'");
        }
        pos[i] = found;
    }
    FsdMatrix aligned;
    aligned.k = stored.k;
    aligned.labels = names;
    aligned.values.resize(stored.k * stored.k);
    for (std::size_t i = 0; i < stored.k; ++i) {
        for (std::size_t j = 0; j < stored.k; ++j) {
            aligned.at(i, j) = stored.at(pos[i], pos[j]);
        }
    }
    return aligned;
}

std::vector<int> parse_sizes(const std::string& text, int pool_size) {
    std::vector<int> sizes;
    auto parse_int = [&](const std::string& s) {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(s, &pos);
            if (pos != s.size()) {
                throw std::invalid_argument(s);
            }
            return v;
        } catch (...) {
            throw UsageError("cannot parse size '" + s + "' in --sizes");
        }
    };
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const int lo = parse_int(text.substr(0, dots));
        const int hi = parse_int(text.substr(dots + 2));
        if (lo > hi) {
            throw UsageError("--sizes range is empty");
        }
        for (int k = lo; k <= hi; ++k) {
            sizes.push_back(k);
        }
    } else {
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto comma = text.find(',', start);
            const std::string piece =
                text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!piece.empty()) {
                sizes.push_back(parse_int(piece));
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
    }
    if (sizes.empty()) {
        throw UsageError("--sizes selects nothing");
    }
    for (int k : sizes) {
        if (k < 1 || k > pool_size) {
            throw Error("size " + std::to_string(k) + " out of range [1, " +
                        std::to_string(pool_size) + "]");
        }
    }
    return sizes;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string piece =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!piece.empty()) {
            try {
                seeds.push_back(std::stoull(piece));
            } catch (...) {
                throw UsageError("cannot parse seed '" + piece + "' in --seeds");
            }
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    if (seeds.empty()) {
        throw UsageError("--seeds selects nothing");
    }
    return seeds;
}

std::string join_names(const std::vector<std::string>& names) {
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0) {
            out += ';';
        }
        out += sorted[i];
    }
    return out;
}

struct GlobalOptions {
    int threads = 0;  // 0 = all cores; ADAPTER_MIXER_THREADS overrides
    std::uint64_t seed = 42;
    bool quiet = false;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"adapter-mixer: weight-space adapter mixing, sign-conflict analysis, "
                 "pruning, and the desk-scale benchmark"};
    app.set_version_flag("--version", std::string("adapter-mixer ") + kArtifactVersion);
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    GlobalOptions global;
    app.add_option("--threads", global.threads, "worker threads (0 = all cores)");
    app.add_option("--seed", global.seed, "master seed for toy commands");
    app.add_flag("--quiet", global.quiet, "suppress progress output");

    auto info = [&](const std::string& message) {
        if (!global.quiet) {
            out << message << "\n";
        }
    };

    // fsd
    auto* cmd_fsd = app.add_subcommand("fsd", "pairwise fraction of sign difference");
    std::vector<std::string> fsd_inputs;
    std::string fsd_out;
    std::string fsd_per_tensor_dir;
    cmd_fsd->add_option("--inputs", fsd_inputs, "adapter checkpoints")->required();
    cmd_fsd->add_option("--out", fsd_out, "output CSV")->required();
    cmd_fsd->add_option("--per-tensor", fsd_per_tensor_dir, "directory for per-tensor CSVs");

    // mix
    auto* cmd_mix = app.add_subcommand("mix", "uniform weight-space average");
    std::vector<std::string> mix_inputs;
    std::string mix_out;
    cmd_mix->add_option("--inputs", mix_inputs, "adapter checkpoints")->required();
    cmd_mix->add_option("--out", mix_out, "output checkpoint")->required();

    // greedy-mix
    auto* cmd_greedy = app.add_subcommand("greedy-mix", "mix the l adapters with smallest mean FSD");
    std::vector<std::string> greedy_inputs;
    std::string greedy_fsd, greedy_out;
    int greedy_l = 0;
    cmd_greedy->add_option("--inputs", greedy_inputs, "adapter checkpoints")->required();
    cmd_greedy->add_option("--fsd", greedy_fsd, "FSD matrix CSV")->required();
    cmd_greedy->add_option("-l", greedy_l, "number of adapters to mix")->required();
    cmd_greedy->add_option("--out", greedy_out, "output checkpoint")->required();

    // prune
    auto* cmd_prune = app.add_subcommand("prune", "magnitude pruning to a target sparsity");
    std::string prune_input, prune_out, prune_mask, prune_scope = "per-tensor";
    double prune_s = 0.0;
    cmd_prune->add_option("--input", prune_input, "adapter checkpoint")->required();
    cmd_prune->add_option("-s", prune_s, "sparsity in [0,1)")->required();
    cmd_prune->add_option("--scope", prune_scope, "per-tensor|global")
        ->check(CLI::IsMember({"per-tensor", "global"}));
    cmd_prune->add_option("--out", prune_out, "output checkpoint")->required();
    cmd_prune->add_option("--mask", prune_mask, "keep/drop mask JSON");

    // sparse-mix
    auto* cmd_sparse = app.add_subcommand("sparse-mix", "mix sparse versions of selected adapters");
    std::vector<std::string> sparse_inputs;
    std::string sparse_fsd, sparse_out, sparse_pool = "selected";
    int sparse_l = 0, sparse_m = 0;
    double sparse_s = 0.0;
    cmd_sparse->add_option("--inputs", sparse_inputs, "adapter checkpoints")->required();
    cmd_sparse->add_option("--fsd", sparse_fsd, "FSD matrix CSV")->required();
    cmd_sparse->add_option("-l", sparse_l, "number of adapters to mix")->required();
    cmd_sparse->add_option("-m", sparse_m, "highest-conflict tensors to prune per adapter")
        ->required();
    cmd_sparse->add_option("-s", sparse_s, "sparsity in [0,1)")->required();
    cmd_sparse->add_option("--conflict-pool", sparse_pool, "selected|all")
        ->check(CLI::IsMember({"selected", "all"}));
    cmd_sparse->add_option("--out", sparse_out, "output checkpoint")->required();

    // sweep
    auto* cmd_sweep = app.add_subcommand("sweep", "evaluate enumerated mixtures of a toy bundle");
    std::string sweep_pool, sweep_target, sweep_sizes, sweep_report;
    double sweep_fgsm = 0.01;
    cmd_sweep->add_option("--pool", sweep_pool, "toy bundle directory")->required();
    cmd_sweep->add_option("--target", sweep_target, "restrict to one target domain");
    cmd_sweep->add_option("--sizes", sweep_sizes, "mixture sizes, e.g. 1..4 or 2,3")->required();
    cmd_sweep->add_option("--report", sweep_report, "output CSV")->required();
    cmd_sweep->add_option("--fgsm", sweep_fgsm, "FGSM epsilon for the fgsm_acc column");

    // toy
    auto* cmd_toy = app.add_subcommand("toy", "desk-scale benchmark");
    cmd_toy->require_subcommand(1);
    cmd_toy->fallthrough();
    auto* cmd_toy_train = cmd_toy->add_subcommand("train", "train one adapter per domain");
    std::string toy_domains, toy_out_dir;
    toy::TrainConfig toy_cfg;
    cmd_toy_train->add_option("--domains", toy_domains, "domains.json")->required();
    cmd_toy_train->add_option("--out-dir", toy_out_dir, "bundle output directory")->required();
    cmd_toy_train->add_option("--lr", toy_cfg.learning_rate, "learning rate");
    cmd_toy_train->add_option("--momentum", toy_cfg.momentum, "SGD momentum");
    cmd_toy_train->add_option("--epochs", toy_cfg.epochs, "training epochs");
    cmd_toy_train->add_option("--batch-size", toy_cfg.batch_size, "mini-batch size");

    auto* cmd_toy_corr = cmd_toy->add_subcommand("correlate", "FSD vs generalizability experiment");
    std::string corr_domains, corr_report, corr_seeds = "1,2,3";
    double corr_fgsm = -1.0;
    toy::TrainConfig corr_cfg;
    cmd_toy_corr->add_option("--domains", corr_domains, "domains.json")->required();
    cmd_toy_corr->add_option("--report", corr_report, "output corr.json")->required();
    cmd_toy_corr->add_option("--fgsm", corr_fgsm, "also evaluate under FGSM at this epsilon");
    cmd_toy_corr->add_option("--seeds", corr_seeds, "comma-separated run seeds");
    cmd_toy_corr->add_option("--lr", corr_cfg.learning_rate, "learning rate");
    cmd_toy_corr->add_option("--momentum", corr_cfg.momentum, "SGD momentum");
    cmd_toy_corr->add_option("--epochs", corr_cfg.epochs, "training epochs");
    cmd_toy_corr->add_option("--batch-size", corr_cfg.batch_size, "mini-batch size");

    // report
    auto* cmd_report = app.add_subcommand("report", "render FSD heatmaps and per-k summaries");
    std::string report_fsd, report_heatmap, report_sweep, report_per_k;
    cmd_report->add_option("--fsd", report_fsd, "FSD matrix CSV");
    cmd_report->add_option("--heatmap", report_heatmap, "output SVG heatmap");
    cmd_report->add_option("--sweep", report_sweep, "sweep CSV to summarize");
    cmd_report->add_option("--per-k", report_per_k, "output per-k summary CSV");

    // CLI11's vector overload consumes a reversed argument list
    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << app.version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    ManifestBuilder manifest;
    manifest.command_line.push_back("adapter-mixer");
    for (const auto& a : args) {
        manifest.command_line.push_back(a);
    }

    const int threads = resolve_threads(global.threads);

    try {
        if (*cmd_fsd) {
            LoadedPool pool = load_inputs(fsd_inputs, manifest);
            const FsdMatrix matrix = fsd_matrix(pool.adapters, pool.names, threads);
            write_fsd_csv(matrix, fsd_out);
            manifest.add_output(fsd_out);
            if (!fsd_per_tensor_dir.empty()) {
                std::filesystem::create_directories(fsd_per_tensor_dir);
                for (std::size_t i = 0; i < pool.adapters.size(); ++i) {
                    for (std::size_t j = i + 1; j < pool.adapters.size(); ++j) {
                        const auto fractions = fsd_per_tensor(pool.adapters[i], pool.adapters[j]);
                        std::string csv = "tensor,fsd\n";
                        char buf[32];
                        for (const auto& [name, fraction] : fractions) {
                            std::snprintf(buf, sizeof(buf), "%.9f", fraction);
                            csv += name + "," + buf + "\n";
                        }
                        const auto path = std::filesystem::path(fsd_per_tensor_dir) /
                                          (pool.names[i] + "__" + pool.names[j] + ".csv");
                        write_file_atomic(path, csv);
                        manifest.add_output(path);
                    }
                }
            }
            manifest.config = {{"command", "fsd"}, {"inputs", fsd_inputs}, {"out", fsd_out},
                               {"per_tensor", fsd_per_tensor_dir}};
            manifest.write(fsd_out);
            info("wrote " + fsd_out);
        } else if (*cmd_mix) {
            LoadedPool pool = load_inputs(mix_inputs, manifest);
            const AdapterCheckpoint mixed = mix_uniform(pool.adapters, pool.names);
            save_checkpoint(mixed, mix_out);
            manifest.add_output(mix_out);
            manifest.config = {{"command", "mix"}, {"inputs", mix_inputs}, {"out", mix_out}};
            manifest.write(mix_out);
            info("wrote " + mix_out);
        } else if (*cmd_greedy) {
            LoadedPool pool = load_inputs(greedy_inputs, manifest);
            manifest.add_input(greedy_fsd);
            const FsdMatrix matrix = align_matrix(read_fsd_csv(greedy_fsd), pool.names);
            const GreedySelection result = greedy_mix(pool.adapters, matrix, greedy_l, pool.names);
            save_checkpoint(result.mixed, greedy_out);
            manifest.add_output(greedy_out);
            manifest.config = {{"command", "greedy-mix"}, {"inputs", greedy_inputs},
                               {"fsd", greedy_fsd}, {"l", greedy_l}, {"out", greedy_out}};
            manifest.write(greedy_out);
            std::string picked;
            for (int idx : result.selected) {
                picked += (picked.empty() ? "" : ";") + pool.names[idx];
            }
            info("selected " + picked);
            info("wrote " + greedy_out);
        } else if (*cmd_prune) {
            manifest.add_input(prune_input);
            const AdapterCheckpoint adapter = load_checkpoint(prune_input);
            const PruneScope scope =
                prune_scope == "global" ? PruneScope::Global : PruneScope::PerTensor;
            const PruneResult result = magnitude_prune(adapter, prune_s, scope);
            save_checkpoint(result.adapter, prune_out);
            manifest.add_output(prune_out);
            if (!prune_mask.empty()) {
                write_mask_json(result.mask, prune_mask);
                manifest.add_output(prune_mask);
            }
            manifest.config = {{"command", "prune"}, {"input", prune_input},
                               {"sparsity", prune_s}, {"scope", prune_scope},
                               {"out", prune_out}, {"mask", prune_mask}};
            manifest.write(prune_out);
            info("wrote " + prune_out);
        } else if (*cmd_sparse) {
            LoadedPool pool = load_inputs(sparse_inputs, manifest);
            manifest.add_input(sparse_fsd);
            const FsdMatrix matrix = align_matrix(read_fsd_csv(sparse_fsd), pool.names);
            const ConflictPool conflict_pool =
                sparse_pool == "all" ? ConflictPool::All : ConflictPool::Selected;
            const SparseMixResult result = sparse_mix(pool.adapters, matrix, sparse_l, sparse_m,
                                                      sparse_s, conflict_pool, pool.names);
            save_checkpoint(result.mixed, sparse_out);
            manifest.add_output(sparse_out);
            manifest.config = {{"command", "sparse-mix"}, {"inputs", sparse_inputs},
                               {"fsd", sparse_fsd}, {"l", sparse_l}, {"m", sparse_m},
                               {"sparsity", sparse_s}, {"conflict_pool", sparse_pool},
                               {"out", sparse_out}};
            manifest.write(sparse_out);
            info("wrote " + sparse_out);
        } else if (*cmd_sweep) {
            const toy::ToyBundle bundle = toy::load_bundle(sweep_pool);
            manifest.add_input(std::filesystem::path(sweep_pool) / "domains.json");
            manifest.add_input(std::filesystem::path(sweep_pool) / "backbone.adpt");

            const int pool_size = static_cast<int>(bundle.domains.size());
            std::vector<int> targets;
            if (sweep_target.empty()) {
                for (int t = 0; t < pool_size; ++t) {
                    targets.push_back(t);
                }
            } else {
                for (int t = 0; t < pool_size; ++t) {
                    if (bundle.domains[t].id == sweep_target) {
                        targets.push_back(t);
                    }
                }
                if (targets.empty()) {
                    throw Error("no domain named '" + sweep_target + "' in the bundle");
                }
            }
            const std::vector<int> sizes = parse_sizes(sweep_sizes, pool_size);

            std::vector<std::string> labels;
            for (const auto& spec : bundle.domains) {
                labels.push_back(spec.id);
            }
            const FsdMatrix fsd = fsd_matrix(bundle.adapters, labels, threads);

            std::vector<toy::TrainedDomain> domains(pool_size);
            for (int i = 0; i < pool_size; ++i) {
                domains[i].data = toy::make_domain(bundle.domains[i]);
                domains[i].adapter = bundle.adapters[i];
                domains[i].head = bundle.heads[i];
            }
            toy::ToyModel backbone;
            backbone.input_dim = bundle.domains[0].input_dim;
            backbone.num_classes = bundle.domains[0].num_classes;
            const Tensor& w1 = bundle.backbone.tensors.at("backbone.weight");
            backbone.hidden_dim = static_cast<int>(w1.shape[0]);
            backbone.w1.assign(w1.data.begin(), w1.data.end());
            const Tensor& b1 = bundle.backbone.tensors.at("backbone.bias");
            backbone.b1.assign(b1.data.begin(), b1.data.end());
            backbone.init_trainable(0);

            struct Job {
                int target;
                std::vector<int> members;
            };
            std::vector<Job> jobs;
            for (int target : targets) {
                for (int k : sizes) {
                    for (const MixtureSpec& spec : enumerate_mixtures(target, pool_size, k)) {
                        jobs.push_back({target, spec.members});
                    }
                }
            }
            std::vector<SweepRow> rows(jobs.size());
            parallel_for(jobs.size(), threads, [&](std::size_t i) {
                const Job& job = jobs[i];
                SweepRow row;
                row.target = bundle.domains[job.target].id;
                row.k = static_cast<int>(job.members.size());
                std::vector<std::string> member_names;
                double fsd_sum = 0.0;
                int pairs = 0;
                for (std::size_t a = 0; a < job.members.size(); ++a) {
                    member_names.push_back(bundle.domains[job.members[a]].id);
                    for (std::size_t b = a + 1; b < job.members.size(); ++b) {
                        fsd_sum += fsd.at(job.members[a], job.members[b]);
                        ++pairs;
                    }
                }
                row.member_set = join_names(member_names);
                row.fsd_mean = pairs == 0 ? 0.0 : fsd_sum / pairs;
                row.clean_acc =
                    toy::evaluate_mixture(backbone, domains, job.members, job.target);
                row.fgsm_acc = sweep_fgsm == 0.0
                                   ? row.clean_acc
                                   : toy::evaluate_mixture(backbone, domains, job.members,
                                                           job.target, sweep_fgsm);
                rows[i] = std::move(row);
            });
            emit_report_csv(std::move(rows), sweep_report);
            manifest.add_output(sweep_report);
            manifest.config = {{"command", "sweep"}, {"pool", sweep_pool},
                               {"target", sweep_target}, {"sizes", sweep_sizes},
                               {"fgsm", sweep_fgsm}, {"report", sweep_report}};
            manifest.write(sweep_report);
            info("wrote " + sweep_report + " (" + std::to_string(jobs.size()) + " rows)");
        } else if (*cmd_toy_train) {
            manifest.add_input(toy_domains);
            manifest.seeds.push_back(global.seed);
            const std::vector<toy::DomainSpec> specs = toy::read_domain_specs(toy_domains);
            toy_cfg.seed = global.seed;
            toy_cfg.validate();

            toy::ToyModel backbone = toy::ToyModel::make(specs[0].input_dim,
                                                         specs[0].num_classes, global.seed, 0);
            toy::ToyBundle bundle;
            bundle.domains = specs;
            bundle.backbone = toy::backbone_checkpoint(backbone, "backbone");
            for (const auto& spec : specs) {
                const toy::DomainDataset data = toy::make_domain(spec);
                toy::TrainResult trained = toy::train_adapter(backbone, data, toy_cfg);
                const double val_acc = toy::evaluate(trained.model, data.val);
                info("trained " + spec.id + " (val_acc=" + double_repr(val_acc) + ")");
                bundle.adapters.push_back(std::move(trained.adapter));
                bundle.heads.push_back(std::move(trained.head));
            }
            toy::save_bundle(bundle, toy_out_dir);
            const std::filesystem::path dir(toy_out_dir);
            manifest.add_output(dir / "domains.json");
            manifest.add_output(dir / "backbone.adpt");
            for (const auto& spec : specs) {
                manifest.add_output(dir / (spec.id + ".adpt"));
                manifest.add_output(dir / (spec.id + ".head.adpt"));
            }
            manifest.config = {{"command", "toy train"}, {"domains", toy_domains},
                               {"out_dir", toy_out_dir}, {"seed", global.seed},
                               {"lr", toy_cfg.learning_rate}, {"momentum", toy_cfg.momentum},
                               {"epochs", toy_cfg.epochs}, {"batch_size", toy_cfg.batch_size}};
            manifest.write(dir / "bundle");
            info("wrote bundle to " + toy_out_dir);
        } else if (*cmd_toy_corr) {
            manifest.add_input(corr_domains);
            toy::CorrelationConfig cfg;
            cfg.domains = toy::read_domain_specs(corr_domains);
            cfg.train = corr_cfg;
            cfg.train.seed = global.seed;
            cfg.train.validate();
            cfg.seeds = parse_seed_list(corr_seeds);
            cfg.backbone_seed = global.seed;
            cfg.threads = threads;
            if (corr_fgsm >= 0.0) {
                cfg.fgsm_eps = corr_fgsm;
            }
            manifest.seeds = cfg.seeds;

            const toy::CorrelationReport report = toy::correlation_experiment(cfg);
            toy::write_correlation_json(report, corr_report);
            manifest.add_output(corr_report);
            manifest.config = {{"command", "toy correlate"}, {"domains", corr_domains},
                               {"report", corr_report}, {"seeds", corr_seeds},
                               {"fgsm", corr_fgsm}, {"seed", global.seed},
                               {"lr", cfg.train.learning_rate},
                               {"momentum", cfg.train.momentum}, {"epochs", cfg.train.epochs},
                               {"batch_size", cfg.train.batch_size}};
            manifest.write(corr_report);
            info("pooled_spearman=" +
                 (std::isfinite(report.pooled_spearman) ? double_repr(report.pooled_spearman)
                                                        : std::string("n/a")));
            info("wrote " + corr_report);
        } else if (*cmd_report) {
            const bool heatmap_job = !report_fsd.empty() || !report_heatmap.empty();
            const bool per_k_job = !report_sweep.empty() || !report_per_k.empty();
            if (heatmap_job && (report_fsd.empty() || report_heatmap.empty())) {
                throw UsageError("report: --fsd and --heatmap must be given together");
            }
            if (per_k_job && (report_sweep.empty() || report_per_k.empty())) {
                throw UsageError("report: --sweep and --per-k must be given together");
            }
            if (!heatmap_job && !per_k_job) {
                throw UsageError("report: nothing to do (give --fsd/--heatmap or --sweep/--per-k)");
            }
            std::filesystem::path primary;
            if (heatmap_job) {
                manifest.add_input(report_fsd);
                emit_heatmap_svg(read_fsd_csv(report_fsd), report_heatmap);
                manifest.add_output(report_heatmap);
                primary = report_heatmap;
                info("wrote " + report_heatmap);
            }
            if (per_k_job) {
                manifest.add_input(report_sweep);
                const std::vector<SweepRow> rows = read_report_csv(report_sweep);
                std::map<std::pair<std::string, int>, std::vector<const SweepRow*>> groups;
                for (const auto& row : rows) {
                    groups[{row.target, row.k}].push_back(&row);
                }
                std::string csv =
                    "target,k,n,clean_acc_mean,clean_acc_min,clean_acc_max,fgsm_acc_mean,"
                    "fsd_mean_mean\n";
                char buf[160];
                for (const auto& [key, members] : groups) {
                    double cm = 0.0, cmin = 1.0, cmax = 0.0, fm = 0.0, sm = 0.0;
                    for (const SweepRow* r : members) {
                        cm += r->clean_acc;
                        cmin = std::min(cmin, r->clean_acc);
                        cmax = std::max(cmax, r->clean_acc);
                        fm += r->fgsm_acc;
                        sm += r->fsd_mean;
                    }
                    const double n = static_cast<double>(members.size());
                    std::snprintf(buf, sizeof(buf), ",%d,%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                                  key.second, members.size(), cm / n, cmin, cmax, fm / n, sm / n);
                    csv += key.first + buf;
                }
                write_file_atomic(report_per_k, csv);
                manifest.add_output(report_per_k);
                if (primary.empty()) {
                    primary = report_per_k;
                }
                info("wrote " + report_per_k);
            }
            manifest.config = {{"command", "report"}, {"fsd", report_fsd},
                               {"heatmap", report_heatmap}, {"sweep", report_sweep},
                               {"per_k", report_per_k}};
            manifest.write(primary);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace mixer::cli
