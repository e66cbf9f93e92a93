#pragma once

#include <cstdint>

#include "artbp/core.hpp"

namespace artbp {

/// Row of p + n agents. Each step every agent keeps half its state, receives
/// half of its right neighbour's state, and gets +theta (first p agents) or
/// -theta (last n agents). Loss is 1/2 (s^1 - target)^2 on the leftmost agent.
///
/// Input: std::monostate. Target: Vector of length 1 holding the desired s^1.
class InfluenceBalancingSystem final : public DynamicalSystem {
 public:
  /// Requires positive >= 1; negative may be 0 here (the builder requires >= 1).
  InfluenceBalancingSystem(std::size_t positive, std::size_t negative, double theta0);

  std::size_t positive() const noexcept { return positive_; }
  std::size_t negative() const noexcept { return negative_; }
  std::size_t agents() const noexcept { return positive_ + negative_; }
  double sign(std::size_t k) const noexcept { return k < positive_ ? 1.0 : -1.0; }

  std::size_t state_size() const override { return agents(); }
  std::size_t param_size() const override { return 1; }
  ParameterVector initial_parameters() const override { return ParameterVector({theta0_}); }

  Vector dloss_dstate(std::span<const double> state, const Signal& target) const override;
  Vector vjp_state(std::span<const double> params, std::span<const double> state,
                   const Signal& input, std::span<const double> adjoint) const override;
  Vector vjp_params(std::span<const double> params, std::span<const double> state,
                    const Signal& input, std::span<const double> adjoint) const override;

  /// The constant observation of the task: no input, target 1 on agent 1.
  static Observation observation(double target = 1.0) { return {std::monostate{}, Vector{target}}; }

 protected:
  Vector do_step(std::span<const double> params, std::span<const double> state,
                 const Signal& input) const override;
  double do_loss(std::span<const double> state, const Signal& target) const override;

 private:
  std::size_t positive_;
  std::size_t negative_;
  double theta0_;
};

/// Rejects zero positive or negative agents.
InfluenceBalancingSystem build_influence_balancing(std::size_t positive, std::size_t negative,
                                                   double theta0);

/// dL_T/dtheta for the influence-balancing system started from the zero state
/// with target 1, by forward sensitivity u_{t+1} = A u_t + sigma. Independent
/// of any backward pass.
double exact_total_gradient_ib(const InfluenceBalancingSystem& system, double theta,
                               std::size_t horizon, double target = 1.0);

enum class Readout { Quadratic, SoftmaxCrossEntropy };

/// h' = tanh(Wx x + Wh h + b), o' = Wo h'. State is (o, h), output block first.
/// Parameters are laid out as Wx (n_h x n_in), Wh (n_h x n_h), Wo (n_out x n_h),
/// b (n_h), all row-major.
///
/// Input: Vector of length n_in, or Token (one-hot, id < n_in).
/// Target: Vector of length n_out for Quadratic, Token for SoftmaxCrossEntropy.
class TanhRnnSystem final : public DynamicalSystem {
 public:
  TanhRnnSystem(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, Readout readout,
                ParameterVector initial);

  std::size_t inputs() const noexcept { return n_in_; }
  std::size_t hidden() const noexcept { return n_h_; }
  std::size_t outputs() const noexcept { return n_out_; }
  Readout readout() const noexcept { return readout_; }

  std::size_t state_size() const override { return n_out_ + n_h_; }
  std::size_t param_size() const override { return param_count(n_in_, n_h_, n_out_); }
  ParameterVector initial_parameters() const override { return initial_; }

  static std::size_t param_count(std::size_t n_in, std::size_t n_h, std::size_t n_out) {
    return n_h * n_in + n_h * n_h + n_out * n_h + n_h;
  }

  Vector dloss_dstate(std::span<const double> state, const Signal& target) const override;
  Vector vjp_state(std::span<const double> params, std::span<const double> state,
                   const Signal& input, std::span<const double> adjoint) const override;
  Vector vjp_params(std::span<const double> params, std::span<const double> state,
                    const Signal& input, std::span<const double> adjoint) const override;
  Vector backward_step(std::span<const double> params, std::span<const double> state,
                       const Signal& input, std::span<const double> adjoint,
                       std::span<double> grad, bool want_state_adjoint) const override;

 protected:
  Vector do_step(std::span<const double> params, std::span<const double> state,
                 const Signal& input) const override;
  double do_loss(std::span<const double> state, const Signal& target) const override;

 private:
  struct Offsets {
    std::size_t wx, wh, wo, b;
  };
  Offsets offsets() const noexcept;
  Vector hidden_preactivation(std::span<const double> params, std::span<const double> state,
                              const Signal& input) const;

  std::size_t n_in_, n_h_, n_out_;
  Readout readout_;
  ParameterVector initial_;
};

/// Weights i.i.d. uniform in [-init_scale, init_scale] from StreamRng(seed, 0).
TanhRnnSystem build_tanh_rnn(std::size_t n_in, std::size_t n_hidden, std::size_t n_out,
                             double init_scale, std::uint64_t seed,
                             Readout readout = Readout::Quadratic);

/// Single-layer LSTM over one-hot characters with a softmax readout on the
/// hidden state. Gates are ordered input, forget, candidate, output; no
/// peepholes. State is (cell, hidden, logits).
///
/// Parameter layout: U (vocab x 4H) input rows, Wh (4H x H), b (4H),
/// Wy (vocab x H), by (vocab), all row-major.
///
/// Input and target: Token with id < vocab.
class LstmCharSystem final : public DynamicalSystem {
 public:
  LstmCharSystem(std::size_t vocab, std::size_t n_hidden, ParameterVector initial);

  static constexpr double kForgetBias = 2.0;

  std::size_t vocab() const noexcept { return vocab_; }
  std::size_t hidden() const noexcept { return n_h_; }

  std::size_t state_size() const override { return 2 * n_h_ + vocab_; }
  std::size_t param_size() const override { return param_count(vocab_, n_h_); }
  ParameterVector initial_parameters() const override { return initial_; }

  static std::size_t param_count(std::size_t vocab, std::size_t n_h) {
    return vocab * 4 * n_h + 4 * n_h * n_h + 4 * n_h + vocab * n_h + vocab;
  }

  /// Index range of the forget-gate biases within the parameter vector.
  std::size_t forget_bias_offset() const noexcept;

  /// Softmax of the logits block of a state.
  Vector probabilities(std::span<const double> state) const;

  Vector dloss_dstate(std::span<const double> state, const Signal& target) const override;
  Vector vjp_state(std::span<const double> params, std::span<const double> state,
                   const Signal& input, std::span<const double> adjoint) const override;
  Vector vjp_params(std::span<const double> params, std::span<const double> state,
                    const Signal& input, std::span<const double> adjoint) const override;
  Vector backward_step(std::span<const double> params, std::span<const double> state,
                       const Signal& input, std::span<const double> adjoint,
                       std::span<double> grad, bool want_state_adjoint) const override;

 protected:
  Vector do_step(std::span<const double> params, std::span<const double> state,
                 const Signal& input) const override;
  double do_loss(std::span<const double> state, const Signal& target) const override;

 private:
  struct Offsets {
    std::size_t u, wh, b, wy, by;
  };
  struct Gates {
    Vector i, f, g, o, cell, tanh_cell, hidden;
  };
  Offsets offsets() const noexcept;
  Gates gates(std::span<const double> params, std::span<const double> state,
              const Signal& input) const;
  std::uint32_t token_of(const Signal& s, const char* what) const;

  std::size_t vocab_, n_h_;
  ParameterVector initial_;
};

/// Forget-gate biases at 2, other biases 0, weights uniform in
/// [-init_scale, init_scale] from StreamRng(seed, 0).
LstmCharSystem build_lstm_char(std::size_t vocab, std::size_t n_hidden, std::uint64_t seed,
                               double init_scale = 0.08);

/// Numerically stable log-sum-exp softmax cross-entropy, in nats.
double softmax_cross_entropy(std::span<const double> logits, std::uint32_t target);

}  // namespace artbp
