#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace scda {

// Thread cap from SCDA_THREADS; 0 or unset means serial.
inline int thread_cap() {
  const char* env = std::getenv("SCDA_THREADS");
  if (!env) return 0;
  const long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<int>(v) : 0;
}

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = thread_cap()) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> workers;
  workers.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) fn(i);
    });
  }
  for (auto& th : workers) th.join();
}

}  // namespace scda
