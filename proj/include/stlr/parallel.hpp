// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace stlr {

/// Runs fn(0..count-1) on up to `workers` threads. Each index runs exactly
/// once; the first failure in index order is rethrown after all workers join.
template <class Fn>
void parallel_for(Eigen::Index count, Eigen::Index workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const auto n_threads = static_cast<std::size_t>(std::min(workers, count));
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back([&] {
      for (Eigen::Index i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace stlr
