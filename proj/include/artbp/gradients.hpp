#pragma once

#include <optional>
#include <string>

#include "artbp/core.hpp"
#include "artbp/execution.hpp"
#include "artbp/trajectory.hpp"

namespace artbp {

struct GradientEstimate {
  Vector values;
  std::string algorithm;
  std::optional<std::uint64_t> schedule_seed;
};

struct BpttResult {
  GradientEstimate gradient;
  /// adjoints[k] = dL_T/ds at step k (0-based).
  std::vector<Vector> adjoints;
};

/// Exact full-sequence BPTT over a stored trajectory.
BpttResult bptt_full(const DynamicalSystem& system, std::span<const double> params,
                     const TrajectoryView& trajectory);

/// Default finite-difference step: eps_i = base * (1 + |theta_i|).
inline constexpr double kFiniteDifferenceBase = 1e-5;

/// Central differences of the total loss, one coordinate at a time, each from
/// a fresh forward pass started at initial_state. Coordinates are independent
/// so the parallel kernel gives bit-identical results to the serial one.
GradientEstimate finite_difference_gradient(const DynamicalSystem& system,
                                            std::span<const double> params,
                                            std::span<const double> initial_state,
                                            std::span<const Observation> observations,
                                            double eps_base = kFiniteDifferenceBase,
                                            Execution execution = Execution::Parallel);

/// ||a - b||_2 / max(||a||_2, ||b||_2); zero when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace artbp
