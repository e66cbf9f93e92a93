#pragma once

#include "artbp/gradients.hpp"
#include "artbp/schedule.hpp"
#include "artbp/trajectory.hpp"

namespace artbp {

struct ArtbpResult {
  GradientEstimate gradient;
  /// Reweighted adjoints, one per step; empty unless requested.
  std::vector<Vector> adjoints;
};

/// Reweighted truncated backward pass over a whole stored trajectory.
///
/// Going backward, the adjoint at step t is dl/ds(s_t) when X_t = 1 or t is
/// the last step, and otherwise dl/ds(s_t) + (1 / (1 - c_t)) * adjoint_{t+1}
/// * dF/ds(x_{t+1}, s_t). The estimate is the sum of adjoint_t * dF/dtheta.
/// With compensate = false the factor is 1 (plain truncated BPTT).
///
/// The schedule must cover the trajectory step for step; the c_t recorded in
/// it are used as-is. Throws std::invalid_argument if c_t >= 1 at a step that
/// is not truncated.
ArtbpResult artbp_backward(const DynamicalSystem& system, std::span<const double> params,
                           const TrajectoryView& trajectory, const TruncationSchedule& schedule,
                           bool compensate = true, bool keep_adjoints = false);

/// Contribution of one gap: the gap's last step acts as the truncation and
/// c_values[k] is the probability recorded for step k of the gap (the last
/// entry is unused). Summing over a partition of the sequence into gaps gives
/// artbp_backward on the whole sequence.
GradientEstimate subsequence_backward(const DynamicalSystem& system,
                                      std::span<const double> params, const TrajectoryView& gap,
                                      std::span<const double> c_values, bool compensate = true);

namespace detail {

/// Shared backward sweep. Adds the estimate into grad. When adjoint_out is
/// non-null it receives one reweighted adjoint per step.
void reweighted_backward(const DynamicalSystem& system, std::span<const double> params,
                         const TrajectoryView& trajectory,
                         std::span<const std::uint8_t> truncate, std::span<const double> probs,
                         bool compensate, std::span<double> grad,
                         std::vector<Vector>* adjoint_out);

}  // namespace detail
}  // namespace artbp
