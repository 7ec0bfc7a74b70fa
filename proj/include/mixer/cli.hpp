// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mixer::cli {

/// Runs the adapter-mixer CLI. `args` excludes the program name. Returns the
/// process exit code: 0 success, 1 domain error (incompatibility, bounds,
/// bad files), 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mixer::cli
