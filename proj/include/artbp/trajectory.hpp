#pragma once

#include <span>

#include "artbp/core.hpp"

namespace artbp {

/// Non-owning slice of a stored forward pass. Step k (0-based) maps
/// state_before(k) to state(k) under observation(k).input.
struct TrajectoryView {
  std::span<const double> initial_state;
  std::span<const Observation> observations;
  std::span<const Vector> states;
  std::span<const double> losses;

  std::size_t size() const noexcept { return states.size(); }
  std::span<const double> state(std::size_t k) const { return states[k]; }
  std::span<const double> state_before(std::size_t k) const {
    return k == 0 ? initial_state : std::span<const double>(states[k - 1]);
  }
  const Observation& observation(std::size_t k) const { return observations[k]; }
  double total_loss() const;

  /// Steps [first, first + count).
  TrajectoryView slice(std::size_t first, std::size_t count) const;
};

/// Stored forward pass. Owns the states and losses; refers to the caller's
/// observations, which must outlive it.
class Trajectory {
 public:
  Trajectory(Vector initial_state, std::span<const Observation> observations);

  /// Appends the post-state and loss of the next observation.
  void push(Vector state, double loss);

  std::size_t size() const noexcept { return states_.size(); }
  bool complete() const noexcept { return states_.size() == observations_.size(); }
  const Vector& initial_state() const noexcept { return initial_; }
  const Vector& state(std::size_t k) const { return states_[k]; }
  const Vector& final_state() const { return states_.empty() ? initial_ : states_.back(); }
  double loss(std::size_t k) const { return losses_[k]; }
  std::span<const double> losses() const noexcept { return losses_; }
  double total_loss() const { return view().total_loss(); }

  TrajectoryView view() const;
  operator TrajectoryView() const { return view(); }  // NOLINT(google-explicit-constructor)

 private:
  Vector initial_;
  std::span<const Observation> observations_;
  std::vector<Vector> states_;
  std::vector<double> losses_;
};

/// Runs the system over observations from initial_state, storing every
/// post-state and loss. DivergedState / DivergedLoss carry the 1-based
/// timestep first_timestep + k.
Trajectory forward(const DynamicalSystem& system, std::span<const double> params,
                   Vector initial_state, std::span<const Observation> observations,
                   std::size_t first_timestep = 1);

/// Total loss of a fresh forward pass; used by finite differences.
double total_loss(const DynamicalSystem& system, std::span<const double> params,
                  std::span<const double> initial_state,
                  std::span<const Observation> observations);

}  // namespace artbp
