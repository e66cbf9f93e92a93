#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "artbp/core.hpp"
#include "artbp/execution.hpp"
#include "artbp/optim.hpp"
#include "artbp/schedule.hpp"

namespace artbp {

enum class Algorithm { Truncated, Artbp };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct DivergenceInfo {
  std::size_t timestep = 0;  // 1-based, within the epoch for batched runs
  std::size_t epoch = 0;
  std::string message;
};

struct LossTrace {
  /// Loss of every processed timestep (averaged over lanes when batched).
  std::vector<double> losses;
  /// Batched runs: mean per-step loss of each completed epoch.
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_seconds;
  std::size_t updates = 0;
  std::optional<DivergenceInfo> divergence;

  /// (1/t) * sum_{u <= t} losses[u], recomputed from the per-step record.
  std::vector<double> cumulative_average() const;
  bool diverged() const noexcept { return divergence.has_value(); }
};

/// Called with each subsequence's gradient right before the optimizer step:
/// (first timestep, length, gradient averaged over lanes).
using UpdateObserver =
    std::function<void(std::size_t first, std::size_t length, std::span<const double> grad)>;

/// Online training over one stream, subsequence by subsequence: draw the next
/// gap length, run the forward pass from the carried state, back-propagate
/// within the gap (reweighted for ARTBP, plain for truncated), update, carry
/// the final state on. The gap schedule is drawn from StreamRng(seed, 0).
///
/// Divergence (non-finite state, loss, gradient or update) ends the run and is
/// recorded in the trace; it is not thrown.
LossTrace train_online(const DynamicalSystem& system, ParameterVector& params,
                       std::span<const Observation> stream, const SchedulePolicy& policy,
                       Algorithm algorithm, Optimizer& optimizer, std::size_t total_steps,
                       std::uint64_t seed, const UpdateObserver& observer = {});

struct BatchOptions {
  /// Default: one schedule per epoch shared by all lanes.
  bool independent_lane_schedules = false;
  Execution execution = Execution::Parallel;
};

using EpochObserver = std::function<void(std::size_t epoch, const ParameterVector& params)>;

/// Epoch-based training over B equal-length lanes processed in parallel.
/// Each epoch restarts every lane from the initial state and draws a fresh
/// schedule (StreamRng(seed, epoch) when shared; StreamRng(seed, epoch * B +
/// lane) when independent). Lane states carry across subsequences within an
/// epoch; subsequences are never shuffled. Lane gradients are summed in lane
/// order and divided by B before each optimizer step.
LossTrace train_batched(const DynamicalSystem& system, ParameterVector& params,
                        std::span<const std::vector<Observation>> lanes,
                        const SchedulePolicy& policy, Algorithm algorithm, Optimizer& optimizer,
                        std::size_t epochs, std::uint64_t seed, const BatchOptions& options = {},
                        const EpochObserver& on_epoch = {}, const UpdateObserver& observer = {});

}  // namespace artbp
