#include "artbp/artbp.hpp"

#include <stdexcept>

namespace artbp {
namespace detail {

void reweighted_backward(const DynamicalSystem& system, std::span<const double> params,
                         const TrajectoryView& trajectory,
                         std::span<const std::uint8_t> truncate, std::span<const double> probs,
                         bool compensate, std::span<double> grad,
                         std::vector<Vector>* adjoint_out) {
  const std::size_t steps = trajectory.size();
  if (truncate.size() != steps || probs.size() != steps) {
    throw DimensionMismatch("schedule length " + std::to_string(truncate.size()) +
                            " does not match trajectory length " + std::to_string(steps));
  }
  if (adjoint_out != nullptr) adjoint_out->assign(steps, Vector{});

  Vector carry;  // adjoint_{t+1} * dF/ds(x_{t+1}, s_t); empty across a cut
  for (std::size_t k = steps; k-- > 0;) {
    Vector delta = system.dloss_dstate(trajectory.state(k), trajectory.observation(k).target);
    const bool cut = truncate[k] != 0 || k + 1 == steps;
    if (!cut && !carry.empty()) {
      if (!(probs[k] < 1.0)) {
        throw std::invalid_argument("truncation probability reached 1 at an untruncated step");
      }
      // The factor is applied once per step, never accumulated over the gap.
      const double factor = compensate ? 1.0 / (1.0 - probs[k]) : 1.0;
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += factor * carry[i];
    }
    const bool flows_back = k > 0 && truncate[k - 1] == 0;
    carry = system.backward_step(params, trajectory.state_before(k),
                                 trajectory.observation(k).input, delta, grad, flows_back);
    if (adjoint_out != nullptr) (*adjoint_out)[k] = std::move(delta);
  }
}

}  // namespace detail

ArtbpResult artbp_backward(const DynamicalSystem& system, std::span<const double> params,
                           const TrajectoryView& trajectory, const TruncationSchedule& schedule,
                           bool compensate, bool keep_adjoints) {
  ArtbpResult r{{Vector(system.param_size(), 0.0), compensate ? "artbp" : "truncated",
                 schedule.seed},
                {}};
  detail::reweighted_backward(system, params, trajectory, schedule.truncate, schedule.probs,
                              compensate, r.gradient.values,
                              keep_adjoints ? &r.adjoints : nullptr);
  if (!all_finite(r.gradient.values)) {
    throw DivergedState(DivergedState::kUnknownTimestep, "non-finite gradient estimate");
  }
  return r;
}

GradientEstimate subsequence_backward(const DynamicalSystem& system,
                                      std::span<const double> params, const TrajectoryView& gap,
                                      std::span<const double> c_values, bool compensate) {
  GradientEstimate g{Vector(system.param_size(), 0.0), compensate ? "artbp" : "truncated",
                     std::nullopt};
  const std::vector<std::uint8_t> no_cuts(gap.size(), 0);
  detail::reweighted_backward(system, params, gap, no_cuts, c_values, compensate, g.values,
                              nullptr);
  if (!all_finite(g.values)) {
    throw DivergedState(DivergedState::kUnknownTimestep, "non-finite gradient estimate");
  }
  return g;
}

}  // namespace artbp
