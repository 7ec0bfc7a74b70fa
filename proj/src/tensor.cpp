// SPDX-License-Identifier: Apache-2.0
#include "mixer/tensor.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "mixer/error.hpp"

namespace mixer {

std::uint64_t shape_elements(std::span<const std::uint64_t> shape) {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) {
        if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
            throw Error("tensor shape overflows element count");
        }
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::uint64_t> shape_in, std::vector<float> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {}

Tensor Tensor::zeros(std::vector<std::uint64_t> shape_in) {
    const std::uint64_t n = shape_elements(shape_in);
    return Tensor(std::move(shape_in), std::vector<float>(n, 0.0f));
}

void Tensor::validate(const std::string& name) const {
    if (shape_elements(shape) != data.size()) {
        throw Error("tensor '" + name + "': shape does not match data length");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw Error("tensor '" + name + "': non-finite value at index " + std::to_string(i));
        }
    }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape || a.data.size() != b.data.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(a.data[i]) != std::bit_cast<std::uint32_t>(b.data[i])) {
            return false;
        }
    }
    return true;
}

}  // namespace mixer
