#include "artbp/trajectory.hpp"

#include <numeric>

namespace artbp {

double TrajectoryView::total_loss() const {
  return std::accumulate(losses.begin(), losses.end(), 0.0);
}

TrajectoryView TrajectoryView::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw std::out_of_range("trajectory slice out of range");
  return TrajectoryView{state_before(first), observations.subspan(first, count),
                        states.subspan(first, count), losses.subspan(first, count)};
}

Trajectory::Trajectory(Vector initial_state, std::span<const Observation> observations)
    : initial_(std::move(initial_state)), observations_(observations) {
  states_.reserve(observations.size());
  losses_.reserve(observations.size());
}

void Trajectory::push(Vector state, double loss) {
  if (complete()) throw std::logic_error("trajectory already covers all observations");
  states_.push_back(std::move(state));
  losses_.push_back(loss);
}

TrajectoryView Trajectory::view() const {
  return TrajectoryView{initial_, observations_.first(states_.size()), states_, losses_};
}

Trajectory forward(const DynamicalSystem& system, std::span<const double> params,
                   Vector initial_state, std::span<const Observation> observations,
                   std::size_t first_timestep) {
  Trajectory traj(std::move(initial_state), observations);
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const std::size_t t = first_timestep + k;
    Vector next;
    try {
      next = system.step(params, traj.final_state(), observations[k].input);
    } catch (const DivergedState&) {
      throw DivergedState(t);
    }
    double l = 0.0;
    try {
      l = system.loss(next, observations[k].target);
    } catch (const DivergedLoss&) {
      throw DivergedLoss(t);
    }
    traj.push(std::move(next), l);
  }
  return traj;
}

double total_loss(const DynamicalSystem& system, std::span<const double> params,
                  std::span<const double> initial_state,
                  std::span<const Observation> observations) {
  Vector s(initial_state.begin(), initial_state.end());
  double total = 0.0;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    s = system.step(params, s, observations[k].input);
    total += system.loss(s, observations[k].target);
  }
  return total;
}

}  // namespace artbp
