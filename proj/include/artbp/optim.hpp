#pragma once

#include <stdexcept>
#include <variant>

#include "artbp/core.hpp"

namespace artbp {

class NonFiniteUpdate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// theta <- theta - eta_t * grad with eta_t = eta0 / sqrt(1 + t).
///
/// The clock t starts at 0 and advances by `ticks` after each update, so a
/// caller that passes the number of timesteps consumed gets a timestep-indexed
/// learning rate.
class Sgd {
 public:
  explicit Sgd(double eta0);

  double eta0() const noexcept { return eta0_; }
  std::size_t clock() const noexcept { return t_; }
  double learning_rate() const noexcept;

  void step(ParameterVector& params, std::span<const double> grad, std::size_t ticks = 1);

 private:
  double eta0_;
  std::size_t t_ = 0;
};

/// Adam with bias correction. The step counter advances once per update.
class Adam {
 public:
  struct Settings {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(Settings settings, std::size_t dim);

  const Settings& settings() const noexcept { return s_; }
  std::size_t clock() const noexcept { return t_; }
  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }

  void step(ParameterVector& params, std::span<const double> grad, std::size_t ticks = 1);

 private:
  Settings s_;
  Vector m_, v_;
  std::size_t t_ = 0;
};

using Optimizer = std::variant<Sgd, Adam>;

/// Dispatches to the held optimizer. Throws NonFiniteUpdate and leaves params
/// and optimizer state untouched if the update would not be finite.
void apply_update(Optimizer& optimizer, ParameterVector& params, std::span<const double> grad,
                  std::size_t ticks);

}  // namespace artbp
