#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include "artbp/execution.hpp"

namespace artbp::detail {

/// Runs body(i) for i in [0, n). Parallel runs use a dynamic OpenMP schedule;
/// the first exception thrown by any iteration is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, Execution execution, Body&& body) {
  if (execution == Execution::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace artbp::detail
