#include "artbp/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "parallel_for.hpp"

namespace artbp {

void MomentAccumulator::add(std::span<const double> x) {
  if (x.size() != mean_.size()) throw DimensionMismatch("moment accumulator dimension");
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta / n;
    m2_[i] += delta * (x[i] - mean_[i]);
  }
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size()) throw DimensionMismatch("moment accumulator dimension");
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    const double delta = other.mean_[i] - mean_[i];
    mean_[i] += delta * nb / n;
    m2_[i] += other.m2_[i] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

Vector MomentAccumulator::variance() const {
  Vector v(m2_.size(), 0.0);
  if (count_ < 2) return v;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(count_ - 1);
  return v;
}

Vector MomentAccumulator::standard_error() const {
  Vector se = variance();
  for (double& v : se) v = std::sqrt(v / static_cast<double>(std::max<std::size_t>(count_, 1)));
  return se;
}

namespace {

struct ReplicaBuffers {
  Vector grad;
  std::vector<Vector> adjoints;
};

void run_replica(const DynamicalSystem& system, std::span<const double> params,
                 const TrajectoryView& trajectory, const MonteCarloConfig& config,
                 std::size_t replica, ReplicaBuffers& buf, MonteCarloResult& into) {
  const TruncationSchedule schedule =
      sample_schedule(config.policy, trajectory.size(), config.seed, replica);
  std::fill(buf.grad.begin(), buf.grad.end(), 0.0);
  const bool want_adjoints = !config.probe_timesteps.empty();
  detail::reweighted_backward(system, params, trajectory, schedule.truncate, schedule.probs,
                              config.compensate, buf.grad,
                              want_adjoints ? &buf.adjoints : nullptr);
  into.gradient.add(buf.grad);
  for (std::size_t p = 0; p < config.probe_timesteps.size(); ++p) {
    into.probes[p].add(buf.adjoints[config.probe_timesteps[p] - 1]);
  }
}

MonteCarloResult empty_result(const DynamicalSystem& system, const MonteCarloConfig& config) {
  MonteCarloResult r{MomentAccumulator(system.param_size()), {}};
  r.probes.assign(config.probe_timesteps.size(), MomentAccumulator(system.state_size()));
  return r;
}

}  // namespace

MonteCarloResult monte_carlo_artbp(const DynamicalSystem& system, std::span<const double> params,
                                   const TrajectoryView& trajectory,
                                   const MonteCarloConfig& config, Execution execution) {
  if (trajectory.size() == 0) throw std::invalid_argument("empty trajectory");
  for (std::size_t t : config.probe_timesteps) {
    if (t < 1 || t > trajectory.size()) throw std::invalid_argument("probe timestep out of range");
  }

  if (execution == Execution::Serial) {
    MonteCarloResult result = empty_result(system, config);
    ReplicaBuffers buf{Vector(system.param_size()), {}};
    for (std::size_t r = 0; r < config.samples; ++r) {
      run_replica(system, params, trajectory, config, r, buf, result);
    }
    return result;
  }

  const std::size_t blocks = (config.samples + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<MonteCarloResult> partial(blocks, empty_result(system, config));
  detail::parallel_for(blocks, execution, [&](std::size_t b) {
    ReplicaBuffers buf{Vector(system.param_size()), {}};
    const std::size_t end = std::min(config.samples, (b + 1) * kMonteCarloBlock);
    for (std::size_t r = b * kMonteCarloBlock; r < end; ++r) {
      run_replica(system, params, trajectory, config, r, buf, partial[b]);
    }
  });
  MonteCarloResult result = empty_result(system, config);
  for (const auto& part : partial) {
    result.gradient.merge(part.gradient);
    for (std::size_t p = 0; p < result.probes.size(); ++p) result.probes[p].merge(part.probes[p]);
  }
  return result;
}

ZTest z_test(std::span<const double> reference, const MomentAccumulator& moments,
             double threshold) {
  if (reference.size() != moments.mean().size()) throw DimensionMismatch("z-test dimension");
  ZTest t;
  t.samples = moments.count();
  t.threshold = threshold;
  const Vector se = moments.standard_error();
  for (std::size_t i = 0; i < reference.size(); ++i) {
    CoordinateCheck c{reference[i], moments.mean()[i], se[i], 0.0};
    const double diff = c.mean - c.reference;
    if (c.stderr_mean > 0.0) {
      c.z = diff / c.stderr_mean;
    } else if (std::abs(diff) > 1e-12 * std::max(1.0, std::abs(c.reference))) {
      c.z = std::copysign(std::numeric_limits<double>::infinity(), diff);
    }
    t.max_abs_z = std::max(t.max_abs_z, std::abs(c.z));
    t.coordinates.push_back(c);
  }
  t.pass = t.max_abs_z <= threshold;
  return t;
}

ProbeReport conditional_expectation_probe(const DynamicalSystem& system,
                                          std::span<const double> params,
                                          const TrajectoryView& trajectory,
                                          const SchedulePolicy& policy, std::size_t timestep,
                                          std::size_t samples, std::uint64_t seed,
                                          double threshold, Execution execution) {
  if (timestep < 1 || timestep > trajectory.size()) {
    throw std::invalid_argument("probe timestep out of range");
  }
  const BpttResult exact = bptt_full(system, params, trajectory);
  MonteCarloConfig cfg{policy, true, samples, seed, {timestep}};
  const MonteCarloResult mc = monte_carlo_artbp(system, params, trajectory, cfg, execution);
  return {timestep, z_test(exact.adjoints[timestep - 1], mc.probes.front(), threshold)};
}

}  // namespace artbp
