#include "artbp/models.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "artbp/rng.hpp"

namespace artbp {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

ConstMatrixMap matrix(std::span<const double> p, std::size_t offset, std::size_t rows,
                      std::size_t cols) {
  return ConstMatrixMap(p.data() + offset, static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

MatrixMap matrix(std::span<double> p, std::size_t offset, std::size_t rows, std::size_t cols) {
  return MatrixMap(p.data() + offset, static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

ConstVectorMap vec(std::span<const double> p, std::size_t offset, std::size_t n) {
  return ConstVectorMap(p.data() + offset, static_cast<Eigen::Index>(n));
}

VectorMap vec(std::span<double> p, std::size_t offset, std::size_t n) {
  return VectorMap(p.data() + offset, static_cast<Eigen::Index>(n));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_adjoint(std::span<const double> adjoint, std::size_t n) {
  if (adjoint.size() != n) {
    throw DimensionMismatch("adjoint has length " + std::to_string(adjoint.size()) +
                            ", expected " + std::to_string(n));
  }
}

Vector softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

Vector uniform_vector(std::size_t n, double scale, std::uint64_t seed) {
  StreamRng rng(seed, 0);
  Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

double softmax_cross_entropy(std::span<const double> logits, std::uint32_t target) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - m);
  return m + std::log(z) - logits[target];
}

// ---------------------------------------------------------------------------
// influence balancing

InfluenceBalancingSystem::InfluenceBalancingSystem(std::size_t positive, std::size_t negative,
                                                   double theta0)
    : positive_(positive), negative_(negative), theta0_(theta0) {
  if (positive == 0) throw std::invalid_argument("influence balancing needs a positive agent");
  if (!std::isfinite(theta0)) throw std::invalid_argument("theta0 must be finite");
}

InfluenceBalancingSystem build_influence_balancing(std::size_t positive, std::size_t negative,
                                                   double theta0) {
  if (negative == 0) {
    throw std::invalid_argument("influence balancing needs at least one agent of each sign");
  }
  return InfluenceBalancingSystem(positive, negative, theta0);
}

Vector InfluenceBalancingSystem::do_step(std::span<const double> params,
                                         std::span<const double> state,
                                         const Signal& input) const {
  if (!std::holds_alternative<std::monostate>(input)) {
    throw DimensionMismatch("influence balancing takes no input");
  }
  const double theta = params[0];
  const std::size_t n = agents();
  Vector next(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    next[k] = 0.5 * state[k] + 0.5 * state[k + 1] + sign(k) * theta;
  }
  next[n - 1] = 0.5 * state[n - 1] + sign(n - 1) * theta;
  return next;
}

namespace {
double ib_target(const Signal& target) {
  const auto* v = std::get_if<Vector>(&target);
  if (v == nullptr || v->size() != 1) {
    throw DimensionMismatch("influence balancing target is a length-1 vector");
  }
  return (*v)[0];
}
}  // namespace

double InfluenceBalancingSystem::do_loss(std::span<const double> state,
                                         const Signal& target) const {
  const double e = state[0] - ib_target(target);
  return 0.5 * e * e;
}

Vector InfluenceBalancingSystem::dloss_dstate(std::span<const double> state,
                                              const Signal& target) const {
  if (state.size() != agents()) throw DimensionMismatch("state size mismatch");
  Vector g(agents(), 0.0);
  g[0] = state[0] - ib_target(target);
  return g;
}

Vector InfluenceBalancingSystem::vjp_state(std::span<const double> params,
                                           std::span<const double> state, const Signal&,
                                           std::span<const double> adjoint) const {
  check_sizes(params, state);
  check_adjoint(adjoint, agents());
  // a^T A with A = 1/2 on the diagonal and the superdiagonal.
  Vector r(agents());
  r[0] = 0.5 * adjoint[0];
  for (std::size_t j = 1; j < agents(); ++j) r[j] = 0.5 * adjoint[j] + 0.5 * adjoint[j - 1];
  return r;
}

Vector InfluenceBalancingSystem::vjp_params(std::span<const double> params,
                                            std::span<const double> state, const Signal&,
                                            std::span<const double> adjoint) const {
  check_sizes(params, state);
  check_adjoint(adjoint, agents());
  double g = 0.0;
  for (std::size_t k = 0; k < agents(); ++k) g += sign(k) * adjoint[k];
  return {g};
}

double exact_total_gradient_ib(const InfluenceBalancingSystem& system, double theta,
                               std::size_t horizon, double target) {
  const std::size_t n = system.agents();
  Vector s(n, 0.0), u(n, 0.0), s_next(n), u_next(n);
  double grad = 0.0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      const double right_s = k + 1 < n ? s[k + 1] : 0.0;
      const double right_u = k + 1 < n ? u[k + 1] : 0.0;
      s_next[k] = 0.5 * s[k] + 0.5 * right_s + system.sign(k) * theta;
      u_next[k] = 0.5 * u[k] + 0.5 * right_u + system.sign(k);
    }
    s.swap(s_next);
    u.swap(u_next);
    grad += (s[0] - target) * u[0];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// tanh RNN

TanhRnnSystem::TanhRnnSystem(std::size_t n_in, std::size_t n_hidden, std::size_t n_out,
                             Readout readout, ParameterVector initial)
    : n_in_(n_in), n_h_(n_hidden), n_out_(n_out), readout_(readout), initial_(std::move(initial)) {
  if (n_in == 0 || n_hidden == 0 || n_out == 0) {
    throw std::invalid_argument("tanh RNN dimensions must be positive");
  }
  if (initial_.size() != param_size()) {
    throw DimensionMismatch("tanh RNN expects " + std::to_string(param_size()) + " parameters");
  }
}

TanhRnnSystem build_tanh_rnn(std::size_t n_in, std::size_t n_hidden, std::size_t n_out,
                             double init_scale, std::uint64_t seed, Readout readout) {
  const std::size_t d = TanhRnnSystem::param_count(n_in, n_hidden, n_out);
  return TanhRnnSystem(n_in, n_hidden, n_out, readout,
                       ParameterVector(uniform_vector(d, init_scale, seed)));
}

TanhRnnSystem::Offsets TanhRnnSystem::offsets() const noexcept {
  Offsets o{};
  o.wx = 0;
  o.wh = o.wx + n_h_ * n_in_;
  o.wo = o.wh + n_h_ * n_h_;
  o.b = o.wo + n_out_ * n_h_;
  return o;
}

Vector TanhRnnSystem::hidden_preactivation(std::span<const double> params,
                                           std::span<const double> state,
                                           const Signal& input) const {
  const Offsets off = offsets();
  Vector z(n_h_);
  VectorMap zm(z.data(), static_cast<Eigen::Index>(n_h_));
  const auto wx = matrix(params, off.wx, n_h_, n_in_);
  zm = vec(params, off.b, n_h_) + matrix(params, off.wh, n_h_, n_h_) * vec(state, n_out_, n_h_);
  if (const auto* x = std::get_if<Vector>(&input)) {
    if (x->size() != n_in_) throw DimensionMismatch("tanh RNN input size mismatch");
    zm += wx * ConstVectorMap(x->data(), static_cast<Eigen::Index>(n_in_));
  } else if (const auto* tok = std::get_if<Token>(&input)) {
    if (tok->id >= n_in_) throw DimensionMismatch("tanh RNN input token out of range");
    zm += wx.col(tok->id);
  } else {
    throw DimensionMismatch("tanh RNN needs an input");
  }
  return z;
}

Vector TanhRnnSystem::do_step(std::span<const double> params, std::span<const double> state,
                              const Signal& input) const {
  const Offsets off = offsets();
  Vector z = hidden_preactivation(params, state, input);
  Vector next(state_size());
  VectorMap h(next.data() + n_out_, static_cast<Eigen::Index>(n_h_));
  for (std::size_t k = 0; k < n_h_; ++k) h[static_cast<Eigen::Index>(k)] = std::tanh(z[k]);
  VectorMap(next.data(), static_cast<Eigen::Index>(n_out_)) =
      matrix(params, off.wo, n_out_, n_h_) * h;
  return next;
}

double TanhRnnSystem::do_loss(std::span<const double> state, const Signal& target) const {
  const auto out = state.first(n_out_);
  if (readout_ == Readout::Quadratic) {
    const auto* y = std::get_if<Vector>(&target);
    if (y == nullptr || y->size() != n_out_) throw DimensionMismatch("quadratic target size");
    double l = 0.0;
    for (std::size_t k = 0; k < n_out_; ++k) l += 0.5 * (out[k] - (*y)[k]) * (out[k] - (*y)[k]);
    return l;
  }
  const auto* tok = std::get_if<Token>(&target);
  if (tok == nullptr || tok->id >= n_out_) throw DimensionMismatch("class target out of range");
  return softmax_cross_entropy(out, tok->id);
}

Vector TanhRnnSystem::dloss_dstate(std::span<const double> state, const Signal& target) const {
  if (state.size() != state_size()) throw DimensionMismatch("state size mismatch");
  Vector g(state_size(), 0.0);
  const auto out = state.first(n_out_);
  if (readout_ == Readout::Quadratic) {
    const auto* y = std::get_if<Vector>(&target);
    if (y == nullptr || y->size() != n_out_) throw DimensionMismatch("quadratic target size");
    for (std::size_t k = 0; k < n_out_; ++k) g[k] = out[k] - (*y)[k];
  } else {
    const auto* tok = std::get_if<Token>(&target);
    if (tok == nullptr || tok->id >= n_out_) throw DimensionMismatch("class target out of range");
    const Vector p = softmax(out);
    for (std::size_t k = 0; k < n_out_; ++k) g[k] = p[k];
    g[tok->id] -= 1.0;
  }
  return g;
}

Vector TanhRnnSystem::backward_step(std::span<const double> params,
                                    std::span<const double> state, const Signal& input,
                                    std::span<const double> adjoint, std::span<double> grad,
                                    bool want_state_adjoint) const {
  check_sizes(params, state);
  check_adjoint(adjoint, state_size());
  if (grad.size() != param_size()) throw DimensionMismatch("gradient buffer size mismatch");
  const Offsets off = offsets();
  const auto n_h = static_cast<Eigen::Index>(n_h_);

  const Vector z = hidden_preactivation(params, state, input);
  Eigen::VectorXd h_next(n_h);
  for (Eigen::Index k = 0; k < n_h; ++k) h_next[k] = std::tanh(z[static_cast<std::size_t>(k)]);

  const auto a_out = vec(adjoint, 0, n_out_);
  const auto wo = matrix(params, off.wo, n_out_, n_h_);
  const Eigen::VectorXd g_h = vec(adjoint, n_out_, n_h_) + wo.transpose() * a_out;
  const Eigen::VectorXd g_z = g_h.array() * (1.0 - h_next.array().square());

  if (const auto* x = std::get_if<Vector>(&input)) {
    matrix(grad, off.wx, n_h_, n_in_).noalias() +=
        g_z * ConstVectorMap(x->data(), static_cast<Eigen::Index>(n_in_)).transpose();
  } else {
    matrix(grad, off.wx, n_h_, n_in_).col(std::get<Token>(input).id) += g_z;
  }
  matrix(grad, off.wh, n_h_, n_h_).noalias() += g_z * vec(state, n_out_, n_h_).transpose();
  matrix(grad, off.wo, n_out_, n_h_).noalias() += a_out * h_next.transpose();
  vec(grad, off.b, n_h_) += g_z;

  if (!want_state_adjoint) return {};
  Vector r(state_size(), 0.0);
  vec(std::span<double>(r), n_out_, n_h_) =
      matrix(params, off.wh, n_h_, n_h_).transpose() * g_z;
  return r;
}

Vector TanhRnnSystem::vjp_state(std::span<const double> params, std::span<const double> state,
                                const Signal& input, std::span<const double> adjoint) const {
  Vector scratch(param_size(), 0.0);
  return backward_step(params, state, input, adjoint, scratch, true);
}

Vector TanhRnnSystem::vjp_params(std::span<const double> params, std::span<const double> state,
                                 const Signal& input, std::span<const double> adjoint) const {
  Vector g(param_size(), 0.0);
  backward_step(params, state, input, adjoint, g, false);
  return g;
}

// ---------------------------------------------------------------------------
// LSTM

LstmCharSystem::LstmCharSystem(std::size_t vocab, std::size_t n_hidden, ParameterVector initial)
    : vocab_(vocab), n_h_(n_hidden), initial_(std::move(initial)) {
  if (vocab < 2) throw std::invalid_argument("LSTM vocabulary needs at least 2 symbols");
  if (n_hidden == 0) throw std::invalid_argument("LSTM hidden size must be positive");
  if (initial_.size() != param_size()) {
    throw DimensionMismatch("LSTM expects " + std::to_string(param_size()) + " parameters");
  }
}

LstmCharSystem::Offsets LstmCharSystem::offsets() const noexcept {
  Offsets o{};
  o.u = 0;
  o.wh = o.u + vocab_ * 4 * n_h_;
  o.b = o.wh + 4 * n_h_ * n_h_;
  o.wy = o.b + 4 * n_h_;
  o.by = o.wy + vocab_ * n_h_;
  return o;
}

std::size_t LstmCharSystem::forget_bias_offset() const noexcept { return offsets().b + n_h_; }

LstmCharSystem build_lstm_char(std::size_t vocab, std::size_t n_hidden, std::uint64_t seed,
                               double init_scale) {
  const std::size_t d = LstmCharSystem::param_count(vocab, n_hidden);
  Vector p = uniform_vector(d, init_scale, seed);
  // Bias blocks: b (4H) then the readout bias at the end.
  const std::size_t b = vocab * 4 * n_hidden + 4 * n_hidden * n_hidden;
  std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(b), 4 * n_hidden, 0.0);
  std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(b + n_hidden), n_hidden,
              LstmCharSystem::kForgetBias);
  std::fill(p.end() - static_cast<std::ptrdiff_t>(vocab), p.end(), 0.0);
  return LstmCharSystem(vocab, n_hidden, ParameterVector(std::move(p)));
}

std::uint32_t LstmCharSystem::token_of(const Signal& s, const char* what) const {
  const auto* tok = std::get_if<Token>(&s);
  if (tok == nullptr || tok->id >= vocab_) {
    throw DimensionMismatch(std::string("LSTM ") + what + " must be a token below vocab size");
  }
  return tok->id;
}

LstmCharSystem::Gates LstmCharSystem::gates(std::span<const double> params,
                                            std::span<const double> state,
                                            const Signal& input) const {
  const Offsets off = offsets();
  const std::size_t x = token_of(input, "input");
  const std::size_t h4 = 4 * n_h_;
  Eigen::VectorXd z = vec(params, off.b, h4) + vec(params, off.u + x * h4, h4);
  z.noalias() += matrix(params, off.wh, h4, n_h_) * vec(state, n_h_, n_h_);

  Gates g{Vector(n_h_), Vector(n_h_), Vector(n_h_), Vector(n_h_),
          Vector(n_h_), Vector(n_h_), Vector(n_h_)};
  for (std::size_t k = 0; k < n_h_; ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    const auto h = static_cast<Eigen::Index>(n_h_);
    g.i[k] = sigmoid(z[e]);
    g.f[k] = sigmoid(z[h + e]);
    g.g[k] = std::tanh(z[2 * h + e]);
    g.o[k] = sigmoid(z[3 * h + e]);
    g.cell[k] = g.f[k] * state[k] + g.i[k] * g.g[k];
    g.tanh_cell[k] = std::tanh(g.cell[k]);
    g.hidden[k] = g.o[k] * g.tanh_cell[k];
  }
  return g;
}

Vector LstmCharSystem::do_step(std::span<const double> params, std::span<const double> state,
                               const Signal& input) const {
  const Offsets off = offsets();
  const Gates g = gates(params, state, input);
  Vector next(state_size());
  std::copy(g.cell.begin(), g.cell.end(), next.begin());
  std::copy(g.hidden.begin(), g.hidden.end(), next.begin() + static_cast<std::ptrdiff_t>(n_h_));
  vec(std::span<double>(next), 2 * n_h_, vocab_) =
      vec(params, off.by, vocab_) +
      matrix(params, off.wy, vocab_, n_h_) * ConstVectorMap(g.hidden.data(),
                                                            static_cast<Eigen::Index>(n_h_));
  return next;
}

Vector LstmCharSystem::probabilities(std::span<const double> state) const {
  return softmax(state.subspan(2 * n_h_, vocab_));
}

double LstmCharSystem::do_loss(std::span<const double> state, const Signal& target) const {
  return softmax_cross_entropy(state.subspan(2 * n_h_, vocab_), token_of(target, "target"));
}

Vector LstmCharSystem::dloss_dstate(std::span<const double> state, const Signal& target) const {
  if (state.size() != state_size()) throw DimensionMismatch("state size mismatch");
  const std::uint32_t y = token_of(target, "target");
  Vector g(state_size(), 0.0);
  const Vector p = probabilities(state);
  std::copy(p.begin(), p.end(), g.begin() + static_cast<std::ptrdiff_t>(2 * n_h_));
  g[2 * n_h_ + y] -= 1.0;
  return g;
}

Vector LstmCharSystem::backward_step(std::span<const double> params,
                                     std::span<const double> state, const Signal& input,
                                     std::span<const double> adjoint, std::span<double> grad,
                                     bool want_state_adjoint) const {
  check_sizes(params, state);
  check_adjoint(adjoint, state_size());
  if (grad.size() != param_size()) throw DimensionMismatch("gradient buffer size mismatch");
  const Offsets off = offsets();
  const std::size_t h4 = 4 * n_h_;
  const std::size_t x = token_of(input, "input");
  const Gates g = gates(params, state, input);

  const auto a_y = vec(adjoint, 2 * n_h_, vocab_);
  const Eigen::VectorXd g_h =
      vec(adjoint, n_h_, n_h_) + matrix(params, off.wy, vocab_, n_h_).transpose() * a_y;

  Eigen::VectorXd dz(static_cast<Eigen::Index>(h4));
  Vector g_c(n_h_);
  for (std::size_t k = 0; k < n_h_; ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    const auto h = static_cast<Eigen::Index>(n_h_);
    g_c[k] = adjoint[k] + g_h[e] * g.o[k] * (1.0 - g.tanh_cell[k] * g.tanh_cell[k]);
    dz[e] = g_c[k] * g.g[k] * g.i[k] * (1.0 - g.i[k]);
    dz[h + e] = g_c[k] * state[k] * g.f[k] * (1.0 - g.f[k]);
    dz[2 * h + e] = g_c[k] * g.i[k] * (1.0 - g.g[k] * g.g[k]);
    dz[3 * h + e] = g_h[e] * g.tanh_cell[k] * g.o[k] * (1.0 - g.o[k]);
  }

  const ConstVectorMap h_next(g.hidden.data(), static_cast<Eigen::Index>(n_h_));
  vec(grad, off.u + x * h4, h4) += dz;
  matrix(grad, off.wh, h4, n_h_).noalias() += dz * vec(state, n_h_, n_h_).transpose();
  vec(grad, off.b, h4) += dz;
  matrix(grad, off.wy, vocab_, n_h_).noalias() += a_y * h_next.transpose();
  vec(grad, off.by, vocab_) += a_y;

  if (!want_state_adjoint) return {};
  Vector r(state_size(), 0.0);
  for (std::size_t k = 0; k < n_h_; ++k) r[k] = g_c[k] * g.f[k];
  vec(std::span<double>(r), n_h_, n_h_) = matrix(params, off.wh, h4, n_h_).transpose() * dz;
  return r;
}

Vector LstmCharSystem::vjp_state(std::span<const double> params, std::span<const double> state,
                                 const Signal& input, std::span<const double> adjoint) const {
  Vector scratch(param_size(), 0.0);
  return backward_step(params, state, input, adjoint, scratch, true);
}

Vector LstmCharSystem::vjp_params(std::span<const double> params,
                                  std::span<const double> state, const Signal& input,
                                  std::span<const double> adjoint) const {
  Vector g(param_size(), 0.0);
  backward_step(params, state, input, adjoint, g, false);
  return g;
}

}  // namespace artbp
