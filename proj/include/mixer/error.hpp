// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mixer {

/// Domain error: incompatible checkpoints, parameter bounds, malformed files.
/// Maps to exit code 1 at the CLI boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input that is a syntax problem rather than a domain problem
/// (e.g. an unparseable --sizes range). Maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mixer
