// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace srf {

// Worker count used by parallel_for. 0 means hardware concurrency. The
// SCAFFOLD_RF_THREADS environment variable seeds the initial value.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end) over a fixed grid of contiguous chunks. The chunk
// boundaries depend only on n, never on the worker count, so reductions that
// combine per-chunk partials in chunk order are bit-reproducible regardless
// of scheduling.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

size_t parallel_chunk_count(size_t n);

}  // namespace srf
