// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace mixer {

/// Resolves the worker count: ADAPTER_MIXER_THREADS env var wins over
/// `requested`; 0 means "all available cores".
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n). With threads > 1 the index range is split into
/// contiguous chunks, one thread each. Each task must write only its own
/// output slot, which keeps results independent of scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace mixer
