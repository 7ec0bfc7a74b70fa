// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "mixer/checkpoint.hpp"
#include "mixer/toy_data.hpp"

namespace mixer::toy {

/// On-disk layout produced by `toy train` and consumed by `sweep`:
///   <dir>/domains.json     domain specs (evaluation data is regenerated)
///   <dir>/backbone.adpt    frozen backbone tensors
///   <dir>/<id>.adpt        one adapter per domain
///   <dir>/<id>.head.adpt   the matching classifier head
struct ToyBundle {
    std::vector<DomainSpec> domains;
    AdapterCheckpoint backbone;
    std::vector<AdapterCheckpoint> adapters;  // aligned with domains
    std::vector<AdapterCheckpoint> heads;
};

bool is_bundle_dir(const std::filesystem::path& dir);
ToyBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const ToyBundle& bundle, const std::filesystem::path& dir);

}  // namespace mixer::toy
