// SPDX-License-Identifier: Apache-2.0
#include "mixer/toy_bundle.hpp"

#include "mixer/error.hpp"

namespace mixer::toy {

bool is_bundle_dir(const std::filesystem::path& dir) {
    return std::filesystem::is_directory(dir) &&
           std::filesystem::exists(dir / "domains.json") &&
           std::filesystem::exists(dir / "backbone.adpt");
}

ToyBundle load_bundle(const std::filesystem::path& dir) {
    if (!is_bundle_dir(dir)) {
        throw Error("'" + dir.string() +
                    "' is not a toybench bundle (missing domains.json or backbone.adpt)");
    }
    ToyBundle bundle;
    bundle.domains = read_domain_specs(dir / "domains.json");
    bundle.backbone = load_checkpoint(dir / "backbone.adpt");
    for (const auto& spec : bundle.domains) {
        bundle.adapters.push_back(load_checkpoint(dir / (spec.id + ".adpt")));
        bundle.heads.push_back(load_checkpoint(dir / (spec.id + ".head.adpt")));
    }
    return bundle;
}

void save_bundle(const ToyBundle& bundle, const std::filesystem::path& dir) {
    if (bundle.adapters.size() != bundle.domains.size() ||
        bundle.heads.size() != bundle.domains.size()) {
        throw Error("bundle: adapters/heads must align with domains");
    }
    std::filesystem::create_directories(dir);
    write_domain_specs(bundle.domains, dir / "domains.json");
    save_checkpoint(bundle.backbone, dir / "backbone.adpt");
    for (std::size_t i = 0; i < bundle.domains.size(); ++i) {
        save_checkpoint(bundle.adapters[i], dir / (bundle.domains[i].id + ".adpt"));
        save_checkpoint(bundle.heads[i], dir / (bundle.domains[i].id + ".head.adpt"));
    }
}

}  // namespace mixer::toy
