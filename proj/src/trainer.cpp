#include "artbp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>

#include "artbp/artbp.hpp"
#include "artbp/trajectory.hpp"
#include "parallel_for.hpp"

namespace artbp {

std::string to_string(Algorithm a) { return a == Algorithm::Artbp ? "artbp" : "truncated"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "artbp") return Algorithm::Artbp;
  if (name == "truncated") return Algorithm::Truncated;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::vector<double> LossTrace::cumulative_average() const {
  std::vector<double> avg(losses.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    sum += losses[t];
    avg[t] = sum / static_cast<double>(t + 1);
  }
  return avg;
}

namespace {

/// One forward step appended to traj; translates divergence to the timestep.
double extend(const DynamicalSystem& system, std::span<const double> params, Trajectory& traj,
              const Observation& obs, std::size_t timestep) {
  Vector next;
  try {
    next = system.step(params, traj.final_state(), obs.input);
  } catch (const DivergedState&) {
    throw DivergedState(timestep);
  }
  double l = 0.0;
  try {
    l = system.loss(next, obs.target);
  } catch (const DivergedLoss&) {
    throw DivergedLoss(timestep);
  }
  traj.push(std::move(next), l);
  return l;
}

}  // namespace

LossTrace train_online(const DynamicalSystem& system, ParameterVector& params,
                       std::span<const Observation> stream, const SchedulePolicy& policy,
                       Algorithm algorithm, Optimizer& optimizer, std::size_t total_steps,
                       std::uint64_t seed, const UpdateObserver& observer) {
  if (stream.empty()) throw std::invalid_argument("training stream is empty");
  if (total_steps == 0) throw std::invalid_argument("total_steps must be >= 1");
  if (stream.size() < total_steps) {
    throw std::invalid_argument("stream has " + std::to_string(stream.size()) +
                                " observations, fewer than total_steps");
  }
  const bool compensate = algorithm == Algorithm::Artbp;
  const auto started = std::chrono::steady_clock::now();

  LossTrace trace;
  trace.losses.reserve(total_steps);
  ScheduleSampler sampler(policy, StreamRng(seed, 0));
  Vector state = system.initial_state();
  std::vector<double> probs;
  std::size_t t = 0;
  while (t < total_steps) {
    probs.clear();
    const std::size_t len = sampler.next_gap(total_steps - t, &probs);
    Trajectory traj(state, stream.subspan(t, len));
    try {
      for (std::size_t k = 0; k < len; ++k) {
        trace.losses.push_back(extend(system, params.view(), traj, stream[t + k], t + k + 1));
      }
      const GradientEstimate g =
          subsequence_backward(system, params.view(), traj, probs, compensate);
      if (observer) observer(t + 1, len, g.values);
      apply_update(optimizer, params, g.values, len);
    } catch (const DivergedState& e) {
      trace.divergence = DivergenceInfo{std::min(e.timestep(), t + len), 0, e.what()};
      break;
    } catch (const DivergedLoss& e) {
      trace.divergence = DivergenceInfo{e.timestep(), 0, e.what()};
      break;
    } catch (const NonFiniteUpdate& e) {
      trace.divergence = DivergenceInfo{t + len, 0, e.what()};
      break;
    }
    ++trace.updates;
    state = traj.final_state();
    t += len;
  }
  trace.epoch_seconds.push_back(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return trace;
}

namespace {

struct Lane {
  std::span<const Observation> observations;
  Vector state;
  std::size_t gap_start = 0;
  std::size_t gap_length = 0;
  std::vector<double> probs;
  std::optional<Trajectory> pending;
  Vector grad;
  std::vector<double> losses;
  std::optional<DivergenceInfo> divergence;

  std::size_t gap_end() const noexcept { return gap_start + gap_length; }

  void open_gap(std::size_t start, std::size_t length, std::vector<double> gap_probs) {
    gap_start = start;
    gap_length = length;
    probs = std::move(gap_probs);
    pending.emplace(state, observations.subspan(start, length));
  }
};

}  // namespace

LossTrace train_batched(const DynamicalSystem& system, ParameterVector& params,
                        std::span<const std::vector<Observation>> lanes,
                        const SchedulePolicy& policy, Algorithm algorithm, Optimizer& optimizer,
                        std::size_t epochs, std::uint64_t seed, const BatchOptions& options,
                        const EpochObserver& on_epoch, const UpdateObserver& observer) {
  if (lanes.empty()) throw std::invalid_argument("need at least one lane");
  const std::size_t length = lanes.front().size();
  if (length == 0) throw std::invalid_argument("lanes are empty");
  for (const auto& lane : lanes) {
    if (lane.size() != length) throw std::invalid_argument("all lanes must have the same length");
  }
  const std::size_t width = lanes.size();
  const bool compensate = algorithm == Algorithm::Artbp;
  const std::size_t d = system.param_size();

  LossTrace trace;
  for (std::size_t epoch = 0; epoch < epochs && !trace.diverged(); ++epoch) {
    const auto started = std::chrono::steady_clock::now();

    std::vector<ScheduleSampler> samplers;
    if (options.independent_lane_schedules) {
      for (std::size_t l = 0; l < width; ++l) {
        samplers.emplace_back(policy, StreamRng(seed, epoch * width + l));
      }
    } else {
      samplers.emplace_back(policy, StreamRng(seed, epoch));
    }

    std::vector<Lane> work(width);
    for (std::size_t l = 0; l < width; ++l) {
      work[l].observations = lanes[l];
      work[l].state = system.initial_state();
      work[l].grad.assign(d, 0.0);
      work[l].losses.assign(length, std::numeric_limits<double>::quiet_NaN());
    }
    auto draw_gap = [&](std::size_t l, std::size_t start) {
      std::vector<double> probs;
      const std::size_t len = samplers[l].next_gap(length - start, &probs);
      return std::make_pair(len, std::move(probs));
    };
    auto open_gaps = [&](std::size_t start, const std::vector<std::size_t>& which) {
      if (options.independent_lane_schedules) {
        for (std::size_t l : which) {
          auto [len, probs] = draw_gap(l, start);
          work[l].open_gap(start, len, std::move(probs));
        }
      } else {
        auto [len, probs] = draw_gap(0, start);
        for (std::size_t l : which) work[l].open_gap(start, len, probs);
      }
    };
    std::vector<std::size_t> everyone(width);
    for (std::size_t l = 0; l < width; ++l) everyone[l] = l;
    open_gaps(0, everyone);

    std::size_t position = 0;     // steps forwarded by every lane
    std::size_t last_update = 0;  // timestep of the previous optimizer step
    Vector grad_sum(d);
    while (position < length) {
      std::size_t until = length;
      for (const auto& lane : work) until = std::min(until, lane.gap_end());

      detail::parallel_for(width, options.execution, [&](std::size_t l) {
        Lane& lane = work[l];
        try {
          for (std::size_t k = position; k < until; ++k) {
            lane.losses[k] = extend(system, params.view(), *lane.pending, lane.observations[k], k + 1);
          }
          if (lane.gap_end() == until) {
            const GradientEstimate g = subsequence_backward(system, params.view(), *lane.pending,
                                                            lane.probs, compensate);
            lane.grad = g.values;
          }
        } catch (const DivergedState& e) {
          lane.divergence = DivergenceInfo{std::min(e.timestep(), until), epoch, e.what()};
        } catch (const DivergedLoss& e) {
          lane.divergence = DivergenceInfo{e.timestep(), epoch, e.what()};
        }
      });

      for (const auto& lane : work) {
        if (lane.divergence &&
            (!trace.divergence || lane.divergence->timestep < trace.divergence->timestep)) {
          trace.divergence = lane.divergence;
        }
      }
      if (trace.diverged()) {
        position = trace.divergence->timestep - 1;
        break;
      }

      std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
      std::vector<std::size_t> finished;
      for (std::size_t l = 0; l < width; ++l) {
        if (work[l].gap_end() != until) continue;
        finished.push_back(l);
        for (std::size_t i = 0; i < d; ++i) grad_sum[i] += work[l].grad[i];
      }
      for (double& g : grad_sum) g /= static_cast<double>(width);
      if (observer) observer(last_update + 1, until - last_update, grad_sum);
      try {
        apply_update(optimizer, params, grad_sum, until - last_update);
      } catch (const NonFiniteUpdate& e) {
        trace.divergence = DivergenceInfo{until, epoch, e.what()};
        position = until;
        break;
      }
      ++trace.updates;
      last_update = until;
      position = until;

      for (std::size_t l : finished) work[l].state = work[l].pending->final_state();
      if (position < length) open_gaps(position, finished);
    }

    double epoch_sum = 0.0;
    for (std::size_t k = 0; k < position; ++k) {
      double step_sum = 0.0;
      for (const auto& lane : work) step_sum += lane.losses[k];
      const double mean = step_sum / static_cast<double>(width);
      trace.losses.push_back(mean);
      epoch_sum += mean;
    }
    trace.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (trace.diverged()) break;
    trace.epoch_mean_loss.push_back(epoch_sum / static_cast<double>(length));
    if (on_epoch) on_epoch(epoch, params);
  }
  return trace;
}

}  // namespace artbp
