#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "artbp/rng.hpp"

namespace artbp {

/// Truncate every `length` steps; no compensation.
struct FixedLength {
  std::size_t length = 1;
};

/// Truncate with constant probability c; gap lengths are geometric with mean 1/c.
struct ConstantRate {
  double c = 0.5;
};

/// c = (alpha - 1) / ((alpha - 2) * mean_length + dt), dt the time since the
/// last truncation. Gap lengths have mean close to mean_length and a
/// polynomial tail.
struct PowerLaw {
  double alpha = 6.0;
  double mean_length = 16.0;
};

/// Never truncate (other than at the end of the sequence).
struct NeverTruncate {};

double power_law_c(double alpha, double mean_length, std::size_t since_last);

class SchedulePolicy {
 public:
  using Variant = std::variant<FixedLength, ConstantRate, PowerLaw, NeverTruncate>;

  SchedulePolicy() : variant_(NeverTruncate{}) {}
  /// Validates the parameters: L >= 1; 0 < c < 1; alpha > 2 and L0 > 1.
  SchedulePolicy(Variant v);  // NOLINT(google-explicit-constructor)

  const Variant& variant() const noexcept { return variant_; }

  /// Deterministic policies (FixedLength, NeverTruncate) carry no
  /// compensation: their recorded probabilities are all zero.
  bool stochastic() const noexcept;

  /// Probability of truncating at a step that lies `since_last` steps after
  /// the previous truncation (since_last >= 1). Zero for deterministic policies.
  double truncation_probability(std::size_t since_last) const;

  /// Whether a deterministic policy truncates at this position.
  bool forced_truncation(std::size_t since_last) const noexcept;

  std::string describe() const;

 private:
  Variant variant_;
};

/// Sampled indicators X_t and the conditional probabilities c_t used to draw them.
struct TruncationSchedule {
  std::vector<std::uint8_t> truncate;
  std::vector<double> probs;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return truncate.size(); }

  /// Inter-truncation gap lengths; the final gap ends at the last step
  /// regardless of its indicator.
  std::vector<std::size_t> gap_lengths() const;
};

/// Draws X_t one step at a time with P(X_t = 1 | past) = c_t. The time since
/// the last truncation resets to 1 on the step after a truncation.
class ScheduleSampler {
 public:
  ScheduleSampler(SchedulePolicy policy, StreamRng rng);

  struct Draw {
    bool truncate;
    double prob;
  };
  Draw next();

  /// Draws until a truncation fires and returns the gap length; with
  /// `limit` > 0 stops early at `limit` steps (the sequence end). Recorded
  /// probabilities of the gap are appended to `probs` when non-null.
  std::size_t next_gap(std::size_t limit = 0, std::vector<double>* probs = nullptr);

  const SchedulePolicy& policy() const noexcept { return policy_; }

 private:
  SchedulePolicy policy_;
  StreamRng rng_;
  std::size_t since_last_ = 0;
};

/// X_1..X_T for one sequence, drawn from StreamRng(seed, stream).
TruncationSchedule sample_schedule(const SchedulePolicy& policy, std::size_t horizon,
                                   std::uint64_t seed, std::uint64_t stream = 0);

/// One gap length drawn by iterating c_t from a fresh gap until a truncation
/// fires. Same distribution as a gap of sample_schedule.
std::size_t next_subsequence_length(const SchedulePolicy& policy, StreamRng& rng);

struct LengthStatistics {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 for a single sample
  double stderr_mean = 0.0;
  std::size_t max = 0;
  /// (L, fraction of samples >= L) at L = 1, 2, 4, ... up to the largest sample.
  std::vector<std::pair<std::size_t, double>> survival;
};

LengthStatistics length_statistics(std::span<const std::size_t> samples);

/// Recomputes the probability each stored step would have under `policy`
/// given the stored indicators, and checks them bit-for-bit.
bool audit_schedule(const TruncationSchedule& schedule, const SchedulePolicy& policy);

}  // namespace artbp
