// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace mixer {

/// Ascending ranks starting at 1; tied values share the average of the ranks
/// they would occupy.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation; NaN when either input has zero variance or fewer
/// than two points.
double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation: Pearson over rank-transformed values. NaN when
/// undefined (constant input).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mixer
