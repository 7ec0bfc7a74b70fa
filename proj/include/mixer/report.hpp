// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mixer/fsd.hpp"

namespace mixer {

/// One evaluated mixture in a sweep report.
struct SweepRow {
    std::string target;
    int k = 0;
    std::string member_set;  // semicolon-joined member names
    double clean_acc = 0.0;
    double fgsm_acc = 0.0;
    double fsd_mean = 0.0;
};

/// CSV with header target,k,member_set,clean_acc,fgsm_acc,fsd_mean; numeric
/// fields fixed to 6 decimals; rows sorted by (target, k, member_set).
/// Deterministic: the same records serialize to identical bytes.
void emit_report_csv(std::vector<SweepRow> rows, const std::filesystem::path& path);
std::vector<SweepRow> read_report_csv(const std::filesystem::path& path);

/// Standalone SVG heatmap of an FSD matrix: k x k cells on a linear color
/// scale from 0 (light) to the max entry (dark), each labeled with the
/// percentage to one decimal, with row/column labels.
void emit_heatmap_svg(const FsdMatrix& matrix, const std::filesystem::path& path);

/// Provenance sidecar written next to every CLI output.
struct RunManifest {
    std::string artifact_version;
    std::vector<std::string> command_line;
    std::string config_digest;                        // sha256 of the resolved config JSON
    std::vector<std::uint64_t> seeds;
    std::map<std::string, std::string> input_digests;   // path -> sha256 of file bytes
    std::map<std::string, std::string> output_digests;  // path -> sha256 of file bytes
    std::string timestamp;                              // ISO-8601 UTC
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace mixer
