#include "artbp/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace artbp {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double power_law_c(double alpha, double mean_length, std::size_t since_last) {
  if (!(alpha > 2.0)) throw std::invalid_argument("power-law alpha must exceed 2");
  if (!(mean_length >= 1.0)) throw std::invalid_argument("power-law L0 must be >= 1");
  if (since_last < 1) throw std::invalid_argument("time since last truncation must be >= 1");
  return (alpha - 1.0) / ((alpha - 2.0) * mean_length + static_cast<double>(since_last));
}

SchedulePolicy::SchedulePolicy(Variant v) : variant_(std::move(v)) {
  std::visit(overloaded{
                 [](const FixedLength& f) {
                   if (f.length < 1) throw std::invalid_argument("fixed length must be >= 1");
                 },
                 [](const ConstantRate& r) {
                   if (!(r.c > 0.0 && r.c < 1.0)) {
                     throw std::invalid_argument("constant truncation rate must lie in (0, 1)");
                   }
                 },
                 [](const PowerLaw& p) {
                   if (!(p.alpha > 2.0)) throw std::invalid_argument("alpha must exceed 2");
                   // L0 = 1 would give c = 1 right after every truncation.
                   if (!(p.mean_length > 1.0)) throw std::invalid_argument("L0 must exceed 1");
                 },
                 [](const NeverTruncate&) {},
             },
             variant_);
}

bool SchedulePolicy::stochastic() const noexcept {
  return std::holds_alternative<ConstantRate>(variant_) ||
         std::holds_alternative<PowerLaw>(variant_);
}

double SchedulePolicy::truncation_probability(std::size_t since_last) const {
  return std::visit(overloaded{
                        [](const FixedLength&) { return 0.0; },
                        [](const NeverTruncate&) { return 0.0; },
                        [](const ConstantRate& r) { return r.c; },
                        [&](const PowerLaw& p) {
                          return power_law_c(p.alpha, p.mean_length, since_last);
                        },
                    },
                    variant_);
}

bool SchedulePolicy::forced_truncation(std::size_t since_last) const noexcept {
  const auto* f = std::get_if<FixedLength>(&variant_);
  return f != nullptr && since_last == f->length;
}

std::string SchedulePolicy::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const FixedLength& f) { os << "fixed(L=" << f.length << ")"; },
                 [&](const ConstantRate& r) { os << "constant_c(c=" << r.c << ")"; },
                 [&](const PowerLaw& p) {
                   os << "power_law(alpha=" << p.alpha << ";L0=" << p.mean_length << ")";
                 },
                 [&](const NeverTruncate&) { os << "none"; },
             },
             variant_);
  return os.str();
}

std::vector<std::size_t> TruncationSchedule::gap_lengths() const {
  std::vector<std::size_t> gaps;
  std::size_t run = 0;
  for (std::size_t t = 0; t < truncate.size(); ++t) {
    ++run;
    if (truncate[t] != 0 || t + 1 == truncate.size()) {
      gaps.push_back(run);
      run = 0;
    }
  }
  return gaps;
}

ScheduleSampler::ScheduleSampler(SchedulePolicy policy, StreamRng rng)
    : policy_(std::move(policy)), rng_(rng) {}

ScheduleSampler::Draw ScheduleSampler::next() {
  ++since_last_;
  Draw d{false, 0.0};
  if (policy_.stochastic()) {
    d.prob = policy_.truncation_probability(since_last_);
    d.truncate = rng_.bernoulli(d.prob);
  } else {
    d.truncate = policy_.forced_truncation(since_last_);
  }
  if (d.truncate) since_last_ = 0;
  return d;
}

std::size_t ScheduleSampler::next_gap(std::size_t limit, std::vector<double>* probs) {
  if (limit == 0 && std::holds_alternative<NeverTruncate>(policy_.variant())) {
    throw std::invalid_argument("a never-truncating policy has no finite gap length");
  }
  std::size_t length = 0;
  while (true) {
    const Draw d = next();
    ++length;
    if (probs != nullptr) probs->push_back(d.prob);
    if (d.truncate || length == limit) return length;
  }
}

TruncationSchedule sample_schedule(const SchedulePolicy& policy, std::size_t horizon,
                                   std::uint64_t seed, std::uint64_t stream) {
  if (horizon < 1) throw std::invalid_argument("schedule horizon must be >= 1");
  TruncationSchedule s;
  s.seed = seed;
  s.truncate.reserve(horizon);
  s.probs.reserve(horizon);
  ScheduleSampler sampler(policy, StreamRng(seed, stream));
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto d = sampler.next();
    s.truncate.push_back(d.truncate ? 1 : 0);
    s.probs.push_back(d.prob);
  }
  return s;
}

std::size_t next_subsequence_length(const SchedulePolicy& policy, StreamRng& rng) {
  if (const auto* f = std::get_if<FixedLength>(&policy.variant())) return f->length;
  if (std::holds_alternative<NeverTruncate>(policy.variant())) {
    throw std::invalid_argument("a never-truncating policy has no finite gap length");
  }
  std::size_t length = 0;
  while (true) {
    ++length;
    if (rng.bernoulli(policy.truncation_probability(length))) return length;
  }
}

LengthStatistics length_statistics(std::span<const std::size_t> samples) {
  if (samples.empty()) throw std::invalid_argument("length statistics need at least one sample");
  LengthStatistics st;
  st.count = samples.size();
  // Welford keeps the variance accurate for heavy-tailed samples.
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (std::size_t x : samples) {
    ++n;
    const double delta = static_cast<double>(x) - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (static_cast<double>(x) - mean);
  }
  st.mean = mean;
  st.variance = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  st.stderr_mean = std::sqrt(st.variance / static_cast<double>(n));
  st.max = *std::max_element(samples.begin(), samples.end());

  std::vector<std::size_t> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t level = 1; level <= st.max; level *= 2) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), level) - sorted.begin();
    const double survival =
        static_cast<double>(sorted.size() - static_cast<std::size_t>(below)) /
        static_cast<double>(sorted.size());
    st.survival.emplace_back(level, survival);
  }
  return st;
}

bool audit_schedule(const TruncationSchedule& schedule, const SchedulePolicy& policy) {
  if (schedule.truncate.size() != schedule.probs.size()) return false;
  std::size_t since_last = 0;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    ++since_last;
    const double expected = policy.truncation_probability(since_last);
    if (schedule.probs[t] != expected || !(schedule.probs[t] < 1.0)) return false;
    if (!policy.stochastic()) {
      const bool forced = policy.forced_truncation(since_last);
      if (forced != (schedule.truncate[t] != 0)) return false;
    }
    if (schedule.truncate[t] != 0) since_last = 0;
  }
  return true;
}

}  // namespace artbp
