// Static block-partitioned parallel for over [0, n).
#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace wgscatter {

inline int resolve_threads(int n_threads) {
  if (n_threads > 0) return n_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// fn(i) must be safe to run concurrently for distinct i.
inline void parallel_for(int n, const std::function<void(int)>& fn, int n_threads = 0) {
  const int workers = std::min(resolve_threads(n_threads), std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Worker-indexed variant: fn(worker, i); used when threads keep private accumulators.
inline int parallel_for_workers(int n, const std::function<void(int, int)>& fn, int n_threads = 0) {
  const int workers = std::min(resolve_threads(n_threads), std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(0, i);
    return 1;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([w, lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(w, i);
    });
  }
  for (auto& t : pool) t.join();
  return workers;
}

}  // namespace wgscatter
