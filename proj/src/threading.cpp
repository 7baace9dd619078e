// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/threading.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace srf {

namespace {

int g_threads = [] {
  if (const char* env = std::getenv("SCAFFOLD_RF_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;
}();

int resolved_threads() {
  if (g_threads > 0) return g_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

constexpr size_t kChunkGrid = 64;

}  // namespace

void set_thread_count(int n) { g_threads = n; }

int thread_count() { return resolved_threads(); }

size_t parallel_chunk_count(size_t n) { return std::min(n, kChunkGrid); }

void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn) {
  if (n == 0) return;
  const size_t chunks = parallel_chunk_count(n);
  const size_t per = (n + chunks - 1) / chunks;
  const int workers = std::min<int>(resolved_threads(), static_cast<int>(chunks));

  auto run_chunk = [&](size_t c) {
    const size_t begin = c * per;
    const size_t end = std::min(n, begin + per);
    if (begin < end) fn(begin, end);
  };

  if (workers <= 1) {
    for (size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) run_chunk(c);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace srf
