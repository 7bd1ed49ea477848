#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace actlab {

// Runs fn(i) for i in [0, n) on up to `workers` OpenMP threads. Callers store
// results by index and merge them in index order, which keeps every output
// independent of the worker count. The first exception thrown by any task is
// rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mutex;
  const long count = static_cast<long>(n);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace actlab
