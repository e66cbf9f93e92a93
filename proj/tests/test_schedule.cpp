#include <gtest/gtest.h>

#include <cmath>

#include "artbp/schedule.hpp"

namespace artbp {
namespace {

std::vector<std::size_t> draw_lengths(const SchedulePolicy& policy, std::size_t n,
                                      std::uint64_t seed) {
  StreamRng rng(seed, 0);
  std::vector<std::size_t> out(n);
  for (auto& L : out) L = next_subsequence_length(policy, rng);
  return out;
}

TEST(PowerLawC, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(power_law_c(6.0, 16.0, 1), 5.0 / 65.0);
  EXPECT_DOUBLE_EQ(power_law_c(4.0, 50.0, 1), 3.0 / 101.0);
  EXPECT_LT(power_law_c(4.0, 50.0, 100000000), 1e-7);
}

TEST(PowerLawC, StrictlyDecreasingInsideUnitInterval) {
  for (double alpha : {2.5, 4.0, 6.0}) {
    for (double L0 : {1.5, 16.0, 50.0}) {
      double prev = 1.0;
      for (std::size_t dt = 1; dt < 2000; ++dt) {
        const double c = power_law_c(alpha, L0, dt);
        EXPECT_GT(c, 0.0);
        EXPECT_LT(c, prev);
        prev = c;
      }
    }
  }
}

TEST(SchedulePolicy, RejectsInvalidParameters) {
  EXPECT_THROW(SchedulePolicy(FixedLength{0}), std::invalid_argument);
  EXPECT_THROW(SchedulePolicy(ConstantRate{0.0}), std::invalid_argument);
  EXPECT_THROW(SchedulePolicy(ConstantRate{1.0}), std::invalid_argument);
  EXPECT_THROW(SchedulePolicy(PowerLaw{2.0, 16.0}), std::invalid_argument);
  EXPECT_THROW(SchedulePolicy(PowerLaw{4.0, 0.5}), std::invalid_argument);
  EXPECT_THROW(SchedulePolicy(PowerLaw{4.0, 1.0}), std::invalid_argument);
  EXPECT_NO_THROW(SchedulePolicy(PowerLaw{2.5, 1.5}));
}

TEST(SampleSchedule, FixedLengthTruncatesOnMultiples) {
  const auto s = sample_schedule(SchedulePolicy{FixedLength{50}}, 150, 1);
  for (std::size_t t = 1; t <= 150; ++t) {
    EXPECT_EQ(s.truncate[t - 1] != 0, t % 50 == 0) << t;
    EXPECT_EQ(s.probs[t - 1], 0.0);
  }
  EXPECT_EQ(s.gap_lengths(), (std::vector<std::size_t>{50, 50, 50}));
}

TEST(SampleSchedule, ProbabilitiesBelowOneAndAuditable) {
  for (const SchedulePolicy& policy :
       {SchedulePolicy{ConstantRate{0.3}}, SchedulePolicy{PowerLaw{4.0, 4.0}},
        SchedulePolicy{PowerLaw{6.0, 16.0}}, SchedulePolicy{FixedLength{7}},
        SchedulePolicy{NeverTruncate{}}}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto s = sample_schedule(policy, 300, seed, seed * 3);
      for (double c : s.probs) EXPECT_LT(c, 1.0);
      EXPECT_TRUE(audit_schedule(s, policy)) << policy.describe();
      if (policy.stochastic()) {
        s.probs[150] = std::nextafter(s.probs[150], 1.0);
        EXPECT_FALSE(audit_schedule(s, policy));
      }
    }
  }
}

TEST(SampleSchedule, DeltaTResetsAfterTruncation) {
  const SchedulePolicy policy{PowerLaw{4.0, 3.0}};
  const auto s = sample_schedule(policy, 500, 9);
  std::size_t since = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    ++since;
    EXPECT_EQ(s.probs[k], power_law_c(4.0, 3.0, since));
    if (s.truncate[k]) since = 0;
  }
}

TEST(SampleSchedule, ReproducibleAndStreamIndependent) {
  const SchedulePolicy policy{ConstantRate{0.2}};
  const auto a = sample_schedule(policy, 1000, 5, 1);
  EXPECT_EQ(a.truncate, sample_schedule(policy, 1000, 5, 1).truncate);
  EXPECT_NE(a.truncate, sample_schedule(policy, 1000, 5, 2).truncate);
  EXPECT_NE(a.truncate, sample_schedule(policy, 1000, 6, 1).truncate);
}

TEST(SampleSchedule, GapsPartitionTheHorizon) {
  const auto s = sample_schedule(SchedulePolicy{PowerLaw{4.0, 10.0}}, 777, 2);
  std::size_t total = 0;
  for (std::size_t g : s.gap_lengths()) {
    EXPECT_GE(g, 1u);
    total += g;
  }
  EXPECT_EQ(total, 777u);
}

TEST(NextSubsequenceLength, FixedIsConstant) {
  for (std::size_t L : draw_lengths(SchedulePolicy{FixedLength{13}}, 100, 1)) EXPECT_EQ(L, 13u);
}

TEST(NextSubsequenceLength, ConstantRateMeanIsInverseRate) {
  for (double c : {0.1, 0.2, 0.5}) {
    const auto st = length_statistics(draw_lengths(SchedulePolicy{ConstantRate{c}}, 100000, 3));
    // Three rates tested at once, so allow 4 standard errors each.
    EXPECT_LT(std::abs(st.mean - 1.0 / c), 4.0 * st.stderr_mean) << c;
    // Geometric variance (1 - c) / c^2.
    EXPECT_NEAR(st.variance, (1.0 - c) / (c * c), 0.05 * (1.0 - c) / (c * c)) << c;
  }
}

TEST(NextSubsequenceLength, PowerLawMeanNearL0) {
  for (double alpha : {4.0, 6.0}) {
    for (double L0 : {16.0, 50.0}) {
      const auto st =
          length_statistics(draw_lengths(SchedulePolicy{PowerLaw{alpha, L0}}, 100000, 4));
      EXPECT_LT(std::abs(st.mean - L0), 0.1 * L0) << alpha << " " << L0;
    }
  }
}

TEST(NextSubsequenceLength, MatchesGapsOfSampledSchedules) {
  const SchedulePolicy policy{PowerLaw{4.0, 4.0}};
  const auto direct = length_statistics(draw_lengths(policy, 50000, 8));
  // The first gap of independent long schedules has the same law.
  std::vector<std::size_t> firsts;
  for (std::uint64_t r = 0; r < 50000; ++r) {
    firsts.push_back(sample_schedule(policy, 2000, 11, r).gap_lengths().front());
  }
  const auto via_schedule = length_statistics(firsts);
  const double se = std::hypot(direct.stderr_mean, via_schedule.stderr_mean);
  EXPECT_LT(std::abs(direct.mean - via_schedule.mean), 4.0 * se);
  for (std::size_t i = 0; i < 4; ++i) {
    const double a = direct.survival[i].second, b = via_schedule.survival[i].second;
    EXPECT_LT(std::abs(a - b), 4.0 * std::sqrt(a * (1 - a) / 25000.0) + 1e-9);
  }
}

TEST(NextSubsequenceLength, PowerLawTailDecaysPolynomially) {
  const double alpha = 4.0, L0 = 4.0;
  const auto st = length_statistics(draw_lengths(SchedulePolicy{PowerLaw{alpha, L0}}, 1000000, 5));
  double prev = 1.0;
  std::vector<double> xs, ys;
  for (const auto& [L, s] : st.survival) {
    EXPECT_LE(s, prev);
    prev = s;
    if (L >= 32 && L <= 256 && s > 0) {
      xs.push_back(std::log(static_cast<double>(L)));
      ys.push_back(std::log(s));
    }
  }
  ASSERT_GE(xs.size(), 3u);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_LT(slope, -(alpha - 2.0));
  EXPECT_GT(slope, -alpha);
}

TEST(LengthStatistics, ConstantSample) {
  const auto st = length_statistics(std::vector<std::size_t>{5, 5, 5});
  EXPECT_EQ(st.mean, 5.0);
  EXPECT_EQ(st.variance, 0.0);
  EXPECT_EQ(st.max, 5u);
  EXPECT_EQ(st.count, 3u);
}

TEST(LengthStatistics, GeometricHalf) {
  const auto st = length_statistics(draw_lengths(SchedulePolicy{ConstantRate{0.5}}, 20000, 6));
  EXPECT_LT(std::abs(st.mean - 2.0), 3.0 * st.stderr_mean);
}

TEST(LengthStatistics, PowerLawVarianceStableUnderDoubling) {
  const SchedulePolicy policy{PowerLaw{6.0, 16.0}};
  const auto all = draw_lengths(policy, 400000, 7);
  std::vector<double> variances;
  for (std::size_t n = 100000; n <= all.size(); n *= 2) {
    variances.push_back(
        length_statistics(std::span<const std::size_t>(all.data(), n)).variance);
  }
  for (std::size_t i = 1; i < variances.size(); ++i) {
    EXPECT_NEAR(variances[i] / variances[0], 1.0, 0.1);
  }
}

TEST(ScheduleSampler, NeverTruncateNeedsALimit) {
  ScheduleSampler s(SchedulePolicy{NeverTruncate{}}, StreamRng(1, 0));
  EXPECT_EQ(s.next_gap(40), 40u);
  EXPECT_THROW(s.next_gap(), std::invalid_argument);
}

}  // namespace
}  // namespace artbp
