#pragma once

#include <cstdint>
#include <vector>

#include "artbp/artbp.hpp"
#include "artbp/execution.hpp"

namespace artbp {

/// Running per-coordinate mean and sum of squared deviations (Welford),
/// mergeable with Chan's pairwise formula.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  void add(std::span<const double> x);
  void merge(const MomentAccumulator& other);

  std::size_t count() const noexcept { return count_; }
  const Vector& mean() const noexcept { return mean_; }
  /// Unbiased sample variance per coordinate (zero below two samples).
  Vector variance() const;
  /// Standard error of the mean per coordinate.
  Vector standard_error() const;

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Vector m2_;
};

struct MonteCarloConfig {
  SchedulePolicy policy;
  bool compensate = true;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  /// 1-based timesteps whose reweighted adjoints are also averaged.
  std::vector<std::size_t> probe_timesteps;
};

struct MonteCarloResult {
  MomentAccumulator gradient;
  std::vector<MomentAccumulator> probes;  // aligned with probe_timesteps
};

/// Replica r draws its schedule from StreamRng(seed, r) and runs
/// artbp_backward on the fixed trajectory.
///
/// Serial: one accumulator fed in replica order (the reference).
/// Parallel: fixed blocks of kMonteCarloBlock replicas, each accumulated in
/// order, then merged in block order; the result does not depend on the
/// thread count.
inline constexpr std::size_t kMonteCarloBlock = 512;

MonteCarloResult monte_carlo_artbp(const DynamicalSystem& system, std::span<const double> params,
                                   const TrajectoryView& trajectory,
                                   const MonteCarloConfig& config, Execution execution);

/// Per-coordinate comparison of a Monte-Carlo mean against a reference.
struct CoordinateCheck {
  double reference = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  double z = 0.0;
};

struct ZTest {
  std::vector<CoordinateCheck> coordinates;
  std::size_t samples = 0;
  double max_abs_z = 0.0;
  double threshold = 4.0;
  bool pass = false;
};

/// z = (mean - reference) / stderr. A zero-variance coordinate gets z = 0
/// when |mean - reference| <= 1e-12 * max(1, |reference|), and +/-inf otherwise.
/// Passes iff max |z| <= threshold.
ZTest z_test(std::span<const double> reference, const MomentAccumulator& moments,
             double threshold);

struct ProbeReport {
  std::size_t timestep = 0;
  ZTest test;
};

/// Monte-Carlo mean of the reweighted adjoint at `timestep` against the exact
/// BPTT adjoint there.
ProbeReport conditional_expectation_probe(const DynamicalSystem& system,
                                          std::span<const double> params,
                                          const TrajectoryView& trajectory,
                                          const SchedulePolicy& policy, std::size_t timestep,
                                          std::size_t samples, std::uint64_t seed,
                                          double threshold = 4.0,
                                          Execution execution = Execution::Parallel);

}  // namespace artbp
