#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace urbanfn::nn {

// Worker count used by batch-parallel kernels. Results never depend on it:
// every reduction runs in a fixed order after the parallel section.
int thread_count();
void set_thread_count(int n);

// Runs f(i) for i in [0, count), split into contiguous chunks.
template <typename F>
void parallel_for(int count, F&& f) {
  int workers = std::min(thread_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(std::size_t(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int i = t; i < count; i += workers) f(i);
        } catch (...) {
          errors[std::size_t(t)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace urbanfn::nn
