#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace stability_lab {

inline constexpr const char* kThreadsEnvVar = "STABILITY_LAB_THREADS";

/// Worker count: an explicit request wins, then STABILITY_LAB_THREADS,
/// then the machine's hardware concurrency.
inline unsigned resolve_worker_count(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kThreadsEnvVar); env != nullptr && *env != '\0') {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(p) once for every partition p in [0, partitions), spread over
/// up to `workers` threads. Results must be written to per-partition slots;
/// the call order is unspecified. The first exception thrown by any body is
/// rethrown after all workers join.
template <class Body>
void for_each_partition(std::int64_t partitions, unsigned workers, Body&& body) {
  if (partitions <= 0) return;
  const auto threads = static_cast<unsigned>(std::min<std::int64_t>(std::max(1u, workers), partitions));
  if (threads == 1) {
    for (std::int64_t p = 0; p < partitions; ++p) body(p);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::int64_t p = next++; p < partitions; p = next++) {
      try {
        body(p);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = partitions;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace stability_lab
