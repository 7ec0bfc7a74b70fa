// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mixer::toy {

/// A synthetic classification domain: C Gaussian clusters in R^input_dim,
/// rotated in the (0,1) coordinate plane. The rotation angle controls how
/// dissimilar two domains are; identical seeds with different angles yield
/// identical labels and rotated inputs.
struct DomainSpec {
    std::string id;
    int input_dim = 16;
    int num_classes = 2;
    double rotation_angle = 0.0;      // radians in [0, pi)
    double cluster_separation = 4.0;  // distance between adjacent class means
    int train_size = 2000;
    int val_size = 500;
    int test_size = 500;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Row-major n x dim inputs with integer labels.
struct Split {
    int n = 0;
    int dim = 0;
    std::vector<double> x;
    std::vector<int> y;

    const double* row(int i) const { return x.data() + static_cast<std::size_t>(i) * dim; }
};

struct DomainDataset {
    DomainSpec spec;
    Split train, val, test;
};

/// Fully determined by spec.seed: same spec, same bytes.
DomainDataset make_domain(const DomainSpec& spec);

/// Class mean for label c before rotation: for C == 2, +-(sep/2) on axis 0;
/// in general, points on a circle in the (0,1) plane whose adjacent chord
/// length equals the separation.
std::vector<double> class_mean(const DomainSpec& spec, int label);

/// domains.json: array of DomainSpec objects.
std::vector<DomainSpec> read_domain_specs(const std::filesystem::path& path);
void write_domain_specs(const std::vector<DomainSpec>& specs,
                        const std::filesystem::path& path);

}  // namespace mixer::toy
