// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "mixer/checkpoint.hpp"
#include "mixer/cli.hpp"
#include "mixer/fsd.hpp"
#include "mixer/io.hpp"
#include "mixer/prune.hpp"
#include "mixer/report.hpp"
#include "mixer/toy_data.hpp"
#include "test_util.hpp"

using namespace mixer;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& path) {
    const auto v = read_file(path);
    return std::string(reinterpret_cast<const char*>(v.data()), v.size());
}

std::string write_domains_json(const testutil::TempDir& tmp, int count, int train_size) {
    std::vector<toy::DomainSpec> specs;
    for (int i = 0; i < count; ++i) {
        toy::DomainSpec spec;
        spec.id = "D" + std::to_string(i);
        spec.rotation_angle = 0.35 * i;
        spec.cluster_separation = 5.0;
        spec.train_size = train_size;
        spec.val_size = 100;
        spec.test_size = 200;
        spec.seed = 1000 + i;
        specs.push_back(spec);
    }
    const auto path = tmp / "domains.json";
    toy::write_domain_specs(specs, path);
    return path.string();
}

}  // namespace

TEST_CASE("cli: fsd on a duplicated input yields a zero matrix, exit 0") {
    testutil::TempDir tmp("cli_fsd");
    const auto a = testutil::random_checkpoint(1, 2, 16);
    save_checkpoint(a, tmp / "a.adpt");

    const auto result = run_cli({"fsd", "--inputs", (tmp / "a.adpt").string(),
                                 (tmp / "a.adpt").string(), "--out", (tmp / "o.csv").string(),
                                 "--quiet"});
    CHECK(result.code == 0);
    const FsdMatrix m = read_fsd_csv(tmp / "o.csv");
    CHECK(m.k == 2);
    CHECK(m.values == std::vector<double>{0.0, 0.0, 0.0, 0.0});
    CHECK(std::filesystem::exists(tmp / "o.csv.manifest.json"));
}

TEST_CASE("cli: missing input file -> exit 1 with 'cannot open'") {
    testutil::TempDir tmp("cli_missing");
    const auto result = run_cli({"mix", "--inputs", (tmp / "nope.adpt").string(), "--out",
                                 (tmp / "o.adpt").string()});
    CHECK(result.code == 1);
    CHECK(result.err.find("cannot open") != std::string::npos);
}

TEST_CASE("cli: usage errors -> exit 2") {
    CHECK(run_cli({"definitely-not-a-command"}).code == 2);
    CHECK(run_cli({"mix"}).code == 2);                       // missing required options
    CHECK(run_cli({"mix", "--bogus-flag", "x"}).code == 2);
    CHECK(run_cli({}).code == 2);                            // a subcommand is required
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"--version"}).code == 0);
}

TEST_CASE("cli: domain bounds -> exit 1") {
    testutil::TempDir tmp("cli_bounds");
    const auto a = testutil::random_checkpoint(1, 2, 16, "a");
    const auto b = testutil::random_checkpoint(2, 2, 16, "b");
    save_checkpoint(a, tmp / "a.adpt");
    save_checkpoint(b, tmp / "b.adpt");
    run_cli({"fsd", "--inputs", (tmp / "a.adpt").string(), (tmp / "b.adpt").string(), "--out",
             (tmp / "fsd.csv").string(), "--quiet"});

    const auto result = run_cli({"greedy-mix", "--inputs", (tmp / "a.adpt").string(),
                                 (tmp / "b.adpt").string(), "--fsd", (tmp / "fsd.csv").string(),
                                 "-l", "5", "--out", (tmp / "o.adpt").string()});
    CHECK(result.code == 1);
    CHECK(result.err.find("l must be in") != std::string::npos);
}

TEST_CASE("cli: mix + prune round trip through files") {
    testutil::TempDir tmp("cli_mix");
    const auto a = testutil::random_checkpoint(11, 2, 32, "a");
    const auto b = testutil::random_checkpoint(12, 2, 32, "b");
    save_checkpoint(a, tmp / "a.adpt");
    save_checkpoint(b, tmp / "b.adpt");

    CHECK(run_cli({"mix", "--inputs", (tmp / "a.adpt").string(), (tmp / "b.adpt").string(),
                   "--out", (tmp / "mixed.adpt").string(), "--quiet"})
              .code == 0);
    const AdapterCheckpoint mixed = load_checkpoint(tmp / "mixed.adpt");
    CHECK(mixed.metadata.at("mix.k") == "2");
    CHECK(mixed.metadata.at("mix.members") == "a;b");

    CHECK(run_cli({"prune", "--input", (tmp / "mixed.adpt").string(), "-s", "0.5", "--out",
                   (tmp / "pruned.adpt").string(), "--mask", (tmp / "mask.json").string(),
                   "--quiet"})
              .code == 0);
    const AdapterCheckpoint pruned = load_checkpoint(tmp / "pruned.adpt");
    for (const auto& [name, tensor] : pruned.tensors) {
        const std::uint64_t zeros =
            std::count(tensor.data.begin(), tensor.data.end(), 0.0f);
        CHECK(zeros >= tensor.size() / 2);
    }
    const PruneMask mask = read_mask_json(tmp / "mask.json");
    CHECK(mask.keep.size() == pruned.tensors.size());
}

TEST_CASE("cli: greedy-mix aligns a permuted FSD matrix by label") {
    testutil::TempDir tmp("cli_greedy");
    const auto a = testutil::random_checkpoint(21, 1, 64, "a");
    const auto b = testutil::random_checkpoint(22, 1, 64, "b");
    const auto c = testutil::random_checkpoint(23, 1, 64, "c");
    save_checkpoint(a, tmp / "a.adpt");
    save_checkpoint(b, tmp / "b.adpt");
    save_checkpoint(c, tmp / "c.adpt");

    // write the matrix with labels in a different order than the inputs
    std::vector<AdapterCheckpoint> pool = {c, a, b};
    const FsdMatrix m = fsd_matrix(pool, {"c", "a", "b"});
    write_fsd_csv(m, tmp / "fsd.csv");

    const auto result = run_cli({"greedy-mix", "--inputs", (tmp / "a.adpt").string(),
                                 (tmp / "b.adpt").string(), (tmp / "c.adpt").string(), "--fsd",
                                 (tmp / "fsd.csv").string(), "-l", "2", "--out",
                                 (tmp / "greedy.adpt").string(), "--quiet"});
    CHECK(result.code == 0);
    CHECK(std::filesystem::exists(tmp / "greedy.adpt"));
}

TEST_CASE("cli: toy train bundle + sweep row count") {
    testutil::TempDir tmp("cli_toy");
    const std::string domains = write_domains_json(tmp, 4, 300);
    const auto bundle_dir = (tmp / "bundle").string();

    const auto train = run_cli({"--seed", "5", "toy", "train", "--domains", domains, "--out-dir",
                                bundle_dir, "--epochs", "12", "--quiet"});
    CHECK(train.code == 0);
    CHECK(std::filesystem::exists(tmp / "bundle" / "backbone.adpt"));
    CHECK(std::filesystem::exists(tmp / "bundle" / "D0.adpt"));
    CHECK(std::filesystem::exists(tmp / "bundle" / "D3.head.adpt"));
    CHECK(std::filesystem::exists(tmp / "bundle" / "bundle.manifest.json"));

    const auto sweep = run_cli({"sweep", "--pool", bundle_dir, "--sizes", "1..4", "--report",
                                (tmp / "sweep.csv").string(), "--quiet"});
    CHECK(sweep.code == 0);
    const auto rows = read_report_csv(tmp / "sweep.csv");
    CHECK(rows.size() == 32);  // count_all_mixtures(4) = 4 * 2^3

    // single-target sweep restricted to pairs
    const auto sweep2 = run_cli({"sweep", "--pool", bundle_dir, "--target", "D1", "--sizes", "2",
                                 "--report", (tmp / "sweep2.csv").string(), "--quiet"});
    CHECK(sweep2.code == 0);
    CHECK(read_report_csv(tmp / "sweep2.csv").size() == 3);

    // determinism: re-running the training command reproduces identical bytes
    const auto bundle2_dir = (tmp / "bundle2").string();
    run_cli({"--seed", "5", "toy", "train", "--domains", domains, "--out-dir", bundle2_dir,
             "--epochs", "12", "--quiet"});
    CHECK(slurp(tmp / "bundle" / "D2.adpt") == slurp(tmp / "bundle2" / "D2.adpt"));
    CHECK(slurp(tmp / "bundle" / "backbone.adpt") == slurp(tmp / "bundle2" / "backbone.adpt"));
}

TEST_CASE("cli: sweep rejects a non-bundle pool") {
    testutil::TempDir tmp("cli_nonbundle");
    const auto result = run_cli({"sweep", "--pool", tmp.path().string(), "--sizes", "1",
                                 "--report", (tmp / "r.csv").string()});
    CHECK(result.code == 1);
    CHECK(result.err.find("not a toybench bundle") != std::string::npos);
}

TEST_CASE("cli: report heatmap and per-k summary") {
    testutil::TempDir tmp("cli_report");
    const auto a = testutil::random_checkpoint(31, 1, 40, "a");
    const auto b = testutil::random_checkpoint(32, 1, 40, "b");
    save_checkpoint(a, tmp / "a.adpt");
    save_checkpoint(b, tmp / "b.adpt");
    run_cli({"fsd", "--inputs", (tmp / "a.adpt").string(), (tmp / "b.adpt").string(), "--out",
             (tmp / "fsd.csv").string(), "--quiet"});

    const auto heat = run_cli({"report", "--fsd", (tmp / "fsd.csv").string(), "--heatmap",
                               (tmp / "fsd.svg").string(), "--quiet"});
    CHECK(heat.code == 0);
    CHECK(slurp(tmp / "fsd.svg").find("<svg") != std::string::npos);

    emit_report_csv({{"D0", 1, "D0", 0.9, 0.8, 0.0}, {"D0", 2, "D0;D1", 0.8, 0.7, 0.1}},
                    tmp / "sweep.csv");
    const auto per_k = run_cli({"report", "--sweep", (tmp / "sweep.csv").string(), "--per-k",
                                (tmp / "per_k.csv").string(), "--quiet"});
    CHECK(per_k.code == 0);
    CHECK(slurp(tmp / "per_k.csv").find("clean_acc_mean") != std::string::npos);

    CHECK(run_cli({"report"}).code == 2);  // nothing to do
}

TEST_CASE("cli: outputs are byte-deterministic across reruns") {
    testutil::TempDir tmp("cli_det");
    const auto a = testutil::random_checkpoint(41, 2, 24, "a");
    const auto b = testutil::random_checkpoint(42, 2, 24, "b");
    save_checkpoint(a, tmp / "a.adpt");
    save_checkpoint(b, tmp / "b.adpt");

    for (const char* name : {"o1.csv", "o2.csv"}) {
        run_cli({"fsd", "--inputs", (tmp / "a.adpt").string(), (tmp / "b.adpt").string(),
                 "--out", (tmp / name).string(), "--quiet"});
    }
    CHECK(slurp(tmp / "o1.csv") == slurp(tmp / "o2.csv"));

    // thread count must not change results
    setenv("ADAPTER_MIXER_THREADS", "4", 1);
    run_cli({"fsd", "--inputs", (tmp / "a.adpt").string(), (tmp / "b.adpt").string(), "--out",
             (tmp / "o3.csv").string(), "--quiet"});
    unsetenv("ADAPTER_MIXER_THREADS");
    CHECK(slurp(tmp / "o1.csv") == slurp(tmp / "o3.csv"));
}
