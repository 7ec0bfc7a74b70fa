// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mixer {

/// Element count implied by a shape (product; empty shape = scalar = 1).
/// Throws Error on multiplication overflow.
std::uint64_t shape_elements(std::span<const std::uint64_t> shape);

/// Dense row-major float32 tensor. The only dtype supported in v1.
struct Tensor {
    std::vector<std::uint64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::uint64_t> shape_in, std::vector<float> data_in);

    static Tensor zeros(std::vector<std::uint64_t> shape_in);

    std::uint64_t size() const { return data.size(); }

    /// Checks product(shape) == data.size() and that every value is finite.
    /// `name` is used in error messages.
    void validate(const std::string& name) const;
};

/// Equality down to the bit pattern of every element (distinguishes -0.0f
/// from 0.0f; data is finite by invariant so NaN never appears).
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace mixer
