#include "artbp/core.hpp"

#include <algorithm>
#include <cmath>

namespace artbp {

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ParameterVector::ParameterVector(Vector values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw std::invalid_argument("parameter vector must have at least one entry");
  }
  if (!all_finite(values_)) {
    throw std::invalid_argument("parameter vector has non-finite entries");
  }
}

void ParameterVector::assign(std::span<const double> values) {
  if (values.size() != values_.size()) {
    throw DimensionMismatch("parameter vector length is fixed at " +
                            std::to_string(values_.size()));
  }
  if (!all_finite(values)) {
    throw std::domain_error("refusing non-finite parameter update");
  }
  std::copy(values.begin(), values.end(), values_.begin());
}

void DynamicalSystem::check_sizes(std::span<const double> params,
                                  std::span<const double> state) const {
  if (params.size() != param_size()) {
    throw DimensionMismatch("expected " + std::to_string(param_size()) + " parameters, got " +
                            std::to_string(params.size()));
  }
  if (state.size() != state_size()) {
    throw DimensionMismatch("expected state of size " + std::to_string(state_size()) +
                            ", got " + std::to_string(state.size()));
  }
}

Vector DynamicalSystem::step(std::span<const double> params, std::span<const double> state,
                             const Signal& input) const {
  check_sizes(params, state);
  Vector next = do_step(params, state, input);
  if (!all_finite(next)) throw DivergedState(DivergedState::kUnknownTimestep);
  return next;
}

double DynamicalSystem::loss(std::span<const double> state, const Signal& target) const {
  if (state.size() != state_size()) throw DimensionMismatch("state size mismatch in loss");
  const double value = do_loss(state, target);
  if (!std::isfinite(value)) throw DivergedLoss(DivergedState::kUnknownTimestep);
  return value;
}

Vector DynamicalSystem::backward_step(std::span<const double> params,
                                      std::span<const double> state, const Signal& input,
                                      std::span<const double> adjoint, std::span<double> grad,
                                      bool want_state_adjoint) const {
  const Vector g = vjp_params(params, state, input, adjoint);
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  if (!want_state_adjoint) return {};
  return vjp_state(params, state, input, adjoint);
}

}  // namespace artbp
