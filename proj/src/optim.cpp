#include "artbp/optim.hpp"

#include <cmath>

namespace artbp {
namespace {

void check_shapes(const ParameterVector& params, std::span<const double> grad) {
  if (grad.size() != params.size()) {
    throw DimensionMismatch("gradient length " + std::to_string(grad.size()) +
                            " does not match parameter length " + std::to_string(params.size()));
  }
}

}  // namespace

Sgd::Sgd(double eta0) : eta0_(eta0) {
  if (!(eta0 >= 0.0) || !std::isfinite(eta0)) throw std::invalid_argument("eta0 must be >= 0");
}

double Sgd::learning_rate() const noexcept {
  return eta0_ / std::sqrt(1.0 + static_cast<double>(t_));
}

void Sgd::step(ParameterVector& params, std::span<const double> grad, std::size_t ticks) {
  check_shapes(params, grad);
  const double eta = learning_rate();
  Vector next = params.values();
  for (std::size_t i = 0; i < next.size(); ++i) next[i] -= eta * grad[i];
  if (!all_finite(next)) {
    throw NonFiniteUpdate("SGD update is not finite at clock " + std::to_string(t_));
  }
  params.assign(next);
  t_ += ticks;
}

Adam::Adam(Settings settings, std::size_t dim) : s_(settings), m_(dim, 0.0), v_(dim, 0.0) {
  if (!(s_.learning_rate >= 0.0)) throw std::invalid_argument("Adam learning rate must be >= 0");
  if (!(s_.beta1 >= 0.0 && s_.beta1 < 1.0) || !(s_.beta2 >= 0.0 && s_.beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(s_.epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

void Adam::step(ParameterVector& params, std::span<const double> grad, std::size_t) {
  check_shapes(params, grad);
  if (m_.size() != params.size()) throw DimensionMismatch("Adam moment length mismatch");
  const std::size_t t = t_ + 1;
  const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t));
  Vector m = m_, v = v_, next = params.values();
  for (std::size_t i = 0; i < next.size(); ++i) {
    m[i] = s_.beta1 * m[i] + (1.0 - s_.beta1) * grad[i];
    v[i] = s_.beta2 * v[i] + (1.0 - s_.beta2) * grad[i] * grad[i];
    next[i] -= s_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + s_.epsilon);
  }
  if (!all_finite(next) || !all_finite(m) || !all_finite(v)) {
    throw NonFiniteUpdate("Adam update is not finite at step " + std::to_string(t));
  }
  params.assign(next);
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

void apply_update(Optimizer& optimizer, ParameterVector& params, std::span<const double> grad,
                  std::size_t ticks) {
  std::visit([&](auto& opt) { opt.step(params, grad, ticks); }, optimizer);
}

}  // namespace artbp
