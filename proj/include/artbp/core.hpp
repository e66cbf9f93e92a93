#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace artbp {

using Vector = std::vector<double>;

/// Index of a symbol in a discrete alphabet (characters, classes).
struct Token {
  std::uint32_t id = 0;
  friend bool operator==(Token, Token) = default;
};

/// Input or target of one timestep: nothing, a dense real vector, or a token.
using Signal = std::variant<std::monostate, Vector, Token>;

struct Observation {
  Signal input;
  Signal target;
};

// ---------------------------------------------------------------------------
// errors

class DivergedState : public std::runtime_error {
 public:
  static constexpr std::size_t kUnknownTimestep = static_cast<std::size_t>(-1);

  explicit DivergedState(std::size_t timestep, const std::string& what = "non-finite state")
      : std::runtime_error(what + describe(timestep)), timestep_(timestep) {}

  std::size_t timestep() const noexcept { return timestep_; }

 private:
  static std::string describe(std::size_t t) {
    return t == kUnknownTimestep ? std::string{} : " at timestep " + std::to_string(t);
  }
  std::size_t timestep_;
};

class DivergedLoss : public std::runtime_error {
 public:
  explicit DivergedLoss(std::size_t timestep)
      : std::runtime_error("non-finite loss" +
                           (timestep == DivergedState::kUnknownTimestep
                                ? std::string{}
                                : " at timestep " + std::to_string(timestep))),
        timestep_(timestep) {}

  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t timestep_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool all_finite(std::span<const double> values) noexcept;

/// Trainable parameters of a system. Length is fixed at construction and
/// every entry is finite.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(Vector values);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> view() const noexcept { return values_; }
  const Vector& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Replaces the values in place. Rejects a length change or non-finite
  /// entries, leaving the current values untouched.
  void assign(std::span<const double> values);

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  Vector values_;
};

// ---------------------------------------------------------------------------
// dynamical system contract

/// Parametric system s_{t+1} = F(x_{t+1}, s_t, theta) with per-step loss
/// l(s_t, target_t). Derivatives are exposed as vector-Jacobian products only.
///
/// Implementations must be pure: no interior mutation, so the const methods
/// may be called concurrently against a fixed parameter snapshot.
class DynamicalSystem {
 public:
  virtual ~DynamicalSystem() = default;

  virtual std::size_t state_size() const = 0;
  virtual std::size_t param_size() const = 0;
  virtual Vector initial_state() const { return Vector(state_size(), 0.0); }
  virtual ParameterVector initial_parameters() const = 0;

  /// One transition. Throws DivergedState if the result is not finite.
  Vector step(std::span<const double> params, std::span<const double> state,
              const Signal& input) const;

  /// Per-step loss. Throws DivergedLoss if the result is not finite.
  double loss(std::span<const double> state, const Signal& target) const;

  virtual Vector dloss_dstate(std::span<const double> state, const Signal& target) const = 0;

  /// adjoint * dF/ds evaluated at (input, state, params).
  virtual Vector vjp_state(std::span<const double> params, std::span<const double> state,
                           const Signal& input, std::span<const double> adjoint) const = 0;

  /// adjoint * dF/dtheta evaluated at (input, state, params).
  virtual Vector vjp_params(std::span<const double> params, std::span<const double> state,
                            const Signal& input, std::span<const double> adjoint) const = 0;

  /// Both products in one pass: adds adjoint * dF/dtheta into grad and
  /// returns adjoint * dF/ds (empty when want_state_adjoint is false).
  virtual Vector backward_step(std::span<const double> params, std::span<const double> state,
                               const Signal& input, std::span<const double> adjoint,
                               std::span<double> grad, bool want_state_adjoint) const;

 protected:
  virtual Vector do_step(std::span<const double> params, std::span<const double> state,
                         const Signal& input) const = 0;
  virtual double do_loss(std::span<const double> state, const Signal& target) const = 0;

  void check_sizes(std::span<const double> params, std::span<const double> state) const;
};

}  // namespace artbp
