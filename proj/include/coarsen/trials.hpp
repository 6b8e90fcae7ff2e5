#ifndef COARSEN_TRIALS_HPP
#define COARSEN_TRIALS_HPP

#include <cstdint>
#include <exception>
#include <mutex>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "coarsen/rng.hpp"

namespace coarsen {

// Trials are independent: trial i sees only derive_seed(base, i) and writes
// only slot i, so the serial loop and the OpenMP fan-out return identical vectors.

template <class Fn>
using TrialResult = std::invoke_result_t<Fn&, std::size_t, std::uint64_t>;

/// Reference implementation.
template <class Fn>
std::vector<TrialResult<Fn>> run_trials_serial(std::size_t n, std::uint64_t base_seed, Fn&& trial) {
  std::vector<TrialResult<Fn>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = trial(i, derive_seed(base_seed, i));
  return out;
}

template <class Fn>
std::vector<TrialResult<Fn>> run_trials_parallel(std::size_t n, std::uint64_t base_seed, int jobs, Fn&& trial) {
  std::vector<TrialResult<Fn>> out(n);
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      const auto k = static_cast<std::size_t>(i);
      out[k] = trial(k, derive_seed(base_seed, k));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

template <class Fn>
std::vector<TrialResult<Fn>> run_trials(std::size_t n, std::uint64_t base_seed, int jobs, Fn&& trial) {
  if (jobs <= 1) return run_trials_serial(n, base_seed, std::forward<Fn>(trial));
  return run_trials_parallel(n, base_seed, jobs, std::forward<Fn>(trial));
}

inline int available_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace coarsen

#endif  // COARSEN_TRIALS_HPP
