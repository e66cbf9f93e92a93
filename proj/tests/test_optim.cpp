#include <gtest/gtest.h>

#include <cmath>

#include "artbp/optim.hpp"

namespace artbp {
namespace {

TEST(Sgd, ZeroGradientLeavesParamsUnchanged) {
  Sgd opt(0.1);
  ParameterVector p(Vector{1.0, -2.0});
  opt.step(p, std::vector{0.0, 0.0});
  EXPECT_EQ(p.values(), (Vector{1.0, -2.0}));
  EXPECT_EQ(opt.clock(), 1u);
}

TEST(Sgd, FirstStepUsesInitialRate) {
  Sgd opt(3e-4);
  ParameterVector p(Vector{0.5});
  opt.step(p, std::vector{2.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5 - 3e-4 * 2.0);
}

TEST(Sgd, RateHalvesAtClockThree) {
  Sgd opt(3e-4);
  ParameterVector p(Vector{0.0});
  opt.step(p, std::vector{0.0}, 3);
  EXPECT_DOUBLE_EQ(opt.learning_rate(), 3e-4 / 2.0);
}

TEST(Sgd, FirstHundredRates) {
  Sgd opt(3e-4);
  ParameterVector p(Vector{0.0});
  for (int t = 0; t < 100; ++t) {
    EXPECT_EQ(opt.learning_rate(), 3e-4 / std::sqrt(1.0 + t)) << t;
    opt.step(p, std::vector{0.0});
  }
}

TEST(Sgd, ClockAdvancesByTicks) {
  Sgd opt(1.0);
  ParameterVector p(Vector{0.0});
  opt.step(p, std::vector{1.0}, 10);
  EXPECT_EQ(opt.clock(), 10u);
  opt.step(p, std::vector{1.0}, 5);
  EXPECT_EQ(opt.clock(), 15u);
  EXPECT_DOUBLE_EQ(p[0], -1.0 - 1.0 / std::sqrt(11.0));
}

TEST(Sgd, NonFiniteUpdateIsRefusedWithoutSideEffects) {
  Sgd opt(1e300);
  ParameterVector p(Vector{1.0});
  EXPECT_THROW(opt.step(p, std::vector{1e300}), NonFiniteUpdate);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(opt.clock(), 0u);
}

TEST(Sgd, ShapeMismatchIsRejected) {
  Sgd opt(1.0);
  ParameterVector p(Vector{1.0, 2.0});
  EXPECT_THROW(opt.step(p, std::vector{1.0}), DimensionMismatch);
}

TEST(Adam, ZeroGradientAtFirstStepLeavesParamsUnchanged) {
  Adam opt({}, 2);
  ParameterVector p(Vector{0.3, 0.4});
  opt.step(p, std::vector{0.0, 0.0});
  EXPECT_EQ(p.values(), (Vector{0.3, 0.4}));
  EXPECT_EQ(opt.clock(), 1u);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Adam opt({1e-3}, 2);
  ParameterVector p(Vector{0.0, 0.0});
  Vector prev = p.values();
  for (int t = 0; t < 2000; ++t) {
    prev = p.values();
    opt.step(p, std::vector{0.7, -3.0});
  }
  EXPECT_NEAR(p[0] - prev[0], -1e-3, 1e-9);
  EXPECT_NEAR(p[1] - prev[1], 1e-3, 1e-9);
}

TEST(Adam, CounterAdvancesOncePerUpdateAndMomentsMatchDimension) {
  Adam opt({}, 3);
  ParameterVector p(Vector{0.0, 0.0, 0.0});
  for (int t = 1; t <= 5; ++t) {
    opt.step(p, std::vector{1.0, 2.0, 3.0}, 50);
    EXPECT_EQ(opt.clock(), static_cast<std::size_t>(t));
  }
  EXPECT_EQ(opt.first_moment().size(), 3u);
  EXPECT_EQ(opt.second_moment().size(), 3u);
}

TEST(Adam, HandComputedFirstStep) {
  Adam opt({0.01, 0.9, 0.999, 1e-8}, 1);
  ParameterVector p(Vector{1.0});
  opt.step(p, std::vector{0.5});
  // Bias-corrected moments equal g and g^2 after one step.
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8));
}

TEST(Adam, NonFiniteUpdateIsRefused) {
  Adam opt({}, 1);
  ParameterVector p(Vector{1.0});
  EXPECT_THROW(opt.step(p, std::vector{std::nan("")}), NonFiniteUpdate);
  EXPECT_EQ(opt.clock(), 0u);
  EXPECT_EQ(opt.first_moment()[0], 0.0);
}

TEST(ApplyUpdate, DispatchesOnVariant) {
  Optimizer opt = Sgd(0.5);
  ParameterVector p(Vector{1.0});
  apply_update(opt, p, std::vector{1.0}, 3);
  EXPECT_EQ(std::get<Sgd>(opt).clock(), 3u);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
}

}  // namespace
}  // namespace artbp
