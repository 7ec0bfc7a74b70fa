// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace mixer {

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace mixer
