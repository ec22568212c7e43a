#pragma once

#include <omp.h>

#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>

namespace sck {

/// Resolves a user thread request: 0 means "all available", negative values
/// are clamped to 1.
inline int resolve_threads(int requested) {
  if (requested == 0) return omp_get_max_threads();
  return requested < 1 ? 1 : requested;
}

/// Runs body(i) for i in [0, count). With threads <= 1 this is a plain loop;
/// otherwise iterations are distributed statically over an OpenMP team.
/// Bodies must write only to index-owned storage. If bodies throw, the
/// exception from the lowest failing index is rethrown after the loop, so the
/// reported error does not depend on the thread count.
template <class Body>
void parallel_for(std::int64_t count, int threads, Body&& body) {
  if (threads <= 1 || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::int64_t failed_at = std::numeric_limits<std::int64_t>::max();
  std::mutex guard;
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (i < failed_at) {
        failed_at = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sck
