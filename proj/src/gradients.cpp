#include "artbp/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "parallel_for.hpp"

namespace artbp {

BpttResult bptt_full(const DynamicalSystem& system, std::span<const double> params,
                     const TrajectoryView& trajectory) {
  const std::size_t steps = trajectory.size();
  BpttResult result{{Vector(system.param_size(), 0.0), "bptt", std::nullopt},
                    std::vector<Vector>(steps)};
  Vector carry;  // delta_{t+1} dF/ds(x_{t+1}, s_t), empty at t = T
  for (std::size_t k = steps; k-- > 0;) {
    Vector delta = system.dloss_dstate(trajectory.state(k), trajectory.observation(k).target);
    if (!carry.empty()) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += carry[i];
    }
    carry = system.backward_step(params, trajectory.state_before(k),
                                 trajectory.observation(k).input, delta,
                                 result.gradient.values, k > 0);
    result.adjoints[k] = std::move(delta);
  }
  if (!all_finite(result.gradient.values)) throw DivergedState(DivergedState::kUnknownTimestep,
                                                               "non-finite gradient");
  return result;
}

GradientEstimate finite_difference_gradient(const DynamicalSystem& system,
                                            std::span<const double> params,
                                            std::span<const double> initial_state,
                                            std::span<const Observation> observations,
                                            double eps_base, Execution execution) {
  if (!(eps_base > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  GradientEstimate g{Vector(params.size(), 0.0), "finite_difference", std::nullopt};
  detail::parallel_for(params.size(), execution, [&](std::size_t i) {
    Vector shifted(params.begin(), params.end());
    const double eps = eps_base * (1.0 + std::abs(params[i]));
    shifted[i] = params[i] + eps;
    const double up = total_loss(system, shifted, initial_state, observations);
    shifted[i] = params[i] - eps;
    const double down = total_loss(system, shifted, initial_state, observations);
    g.values[i] = (up - down) / (2.0 * eps);
  });
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace artbp
