// SPDX-License-Identifier: Apache-2.0
#include "mixer/toy_data.hpp"

#include <cmath>

#include <json.hpp>

#include "mixer/error.hpp"
#include "mixer/io.hpp"
#include "mixer/rng.hpp"

namespace mixer::toy {

using json = nlohmann::json;

void DomainSpec::validate() const {
    if (id.empty()) {
        throw Error("domain spec: id must be non-empty");
    }
    if (input_dim < 2) {
        throw Error("domain '" + id + "': input_dim must be >= 2");
    }
    if (num_classes < 2) {
        throw Error("domain '" + id + "': num_classes must be >= 2");
    }
    if (!(rotation_angle >= 0.0 && rotation_angle < 3.14159265358979323846)) {
        throw Error("domain '" + id + "': rotation_angle must be in [0, pi)");
    }
    if (!(cluster_separation > 0.0)) {
        throw Error("domain '" + id + "': cluster_separation must be > 0");
    }
    if (train_size < 1 || val_size < 1 || test_size < 1) {
        throw Error("domain '" + id + "': split sizes must be >= 1");
    }
}

std::vector<double> class_mean(const DomainSpec& spec, int label) {
    std::vector<double> mean(spec.input_dim, 0.0);
    const double pi = 3.14159265358979323846;
    if (spec.num_classes == 2) {
        mean[0] = (label == 0 ? -0.5 : 0.5) * spec.cluster_separation;
        return mean;
    }
    const double radius = spec.cluster_separation / (2.0 * std::sin(pi / spec.num_classes));
    const double theta = 2.0 * pi * label / spec.num_classes;
    mean[0] = radius * std::cos(theta);
    mean[1] = radius * std::sin(theta);
    return mean;
}

namespace {

Split sample_split(const DomainSpec& spec, int n, Rng& rng) {
    Split split;
    split.n = n;
    split.dim = spec.input_dim;
    split.x.resize(static_cast<std::size_t>(n) * spec.input_dim);
    split.y.resize(n);

    const double c = std::cos(spec.rotation_angle);
    const double s = std::sin(spec.rotation_angle);

    for (int i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng.uniform_int(spec.num_classes));
        split.y[i] = label;
        const std::vector<double> mean = class_mean(spec, label);
        double* row = split.x.data() + static_cast<std::size_t>(i) * spec.input_dim;
        for (int d = 0; d < spec.input_dim; ++d) {
            row[d] = mean[d] + rng.normal();
        }
        // rotate in the (0,1) coordinate plane
        const double x0 = row[0];
        const double x1 = row[1];
        row[0] = c * x0 - s * x1;
        row[1] = s * x0 + c * x1;
    }
    return split;
}

}  // namespace

DomainDataset make_domain(const DomainSpec& spec) {
    spec.validate();
    DomainDataset ds;
    ds.spec = spec;
    Rng rng(spec.seed);
    ds.train = sample_split(spec, spec.train_size, rng);
    ds.val = sample_split(spec, spec.val_size, rng);
    ds.test = sample_split(spec, spec.test_size, rng);
    return ds;
}

namespace {

DomainSpec spec_from_json(const json& j) {
    if (!j.is_object()) {
        throw Error("domains.json: each entry must be an object");
    }
    DomainSpec spec;
    spec.id = j.at("id").get<std::string>();
    spec.input_dim = j.value("input_dim", spec.input_dim);
    spec.num_classes = j.value("num_classes", spec.num_classes);
    spec.rotation_angle = j.value("rotation_angle", spec.rotation_angle);
    spec.cluster_separation = j.value("cluster_separation", spec.cluster_separation);
    spec.train_size = j.value("train_size", spec.train_size);
    spec.val_size = j.value("val_size", spec.val_size);
    spec.test_size = j.value("test_size", spec.test_size);
    spec.seed = j.value("seed", spec.seed);
    spec.validate();
    return spec;
}

json spec_to_json(const DomainSpec& spec) {
    return json{{"id", spec.id},
                {"input_dim", spec.input_dim},
                {"num_classes", spec.num_classes},
                {"rotation_angle", spec.rotation_angle},
                {"cluster_separation", spec.cluster_separation},
                {"train_size", spec.train_size},
                {"val_size", spec.val_size},
                {"test_size", spec.test_size},
                {"seed", spec.seed}};
}

}  // namespace

std::vector<DomainSpec> read_domain_specs(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error("'" + path.string() + "': not valid JSON: " + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw Error("'" + path.string() + "': expected a non-empty array of domain specs");
    }
    std::vector<DomainSpec> specs;
    specs.reserve(doc.size());
    for (const auto& entry : doc) {
        specs.push_back(spec_from_json(entry));
    }
    return specs;
}

void write_domain_specs(const std::vector<DomainSpec>& specs,
                        const std::filesystem::path& path) {
    json doc = json::array();
    for (const auto& spec : specs) {
        doc.push_back(spec_to_json(spec));
    }
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace mixer::toy
