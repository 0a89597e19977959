#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "biopay/loss/adam.hpp"
#include "biopay/loss/losses.hpp"
#include "oracles.hpp"

using namespace biopay::loss;

TEST(Bce, PerfectPredictionIsNearZero) {
  EXPECT_NEAR(bce_objectness(1 - 1e-15, 1).value, 0.0, 1e-11);
  EXPECT_NEAR(bce_objectness(0.0, 0).value, 0.0, 1e-11);
}

TEST(Bce, HalfIsLn2) {
  EXPECT_NEAR(bce_objectness(0.5, 1).value, std::log(2.0), 1e-15);
}

TEST(Bce, ClampKeepsLossFinite) {
  EXPECT_TRUE(std::isfinite(bce_objectness(0.0, 1).value));
  EXPECT_TRUE(std::isfinite(bce_objectness(1.0, 0).value));
}

TEST(Bce, GradientAtHandPoint) {
  const auto r = bce_objectness(0.3, 0);
  const std::vector<double> x{0.3};
  const auto fd = numerical_gradient([](std::span<const double> p) { return bce_objectness(p[0], 0).value; }, x);
  EXPECT_LE(oracle::rel_err(r.grad, fd[0]), 1e-6);
}

TEST(SmoothL1, Values) {
  EXPECT_EQ(smooth_l1(0), 0.0);
  EXPECT_EQ(smooth_l1(0.5), 0.125);
  EXPECT_EQ(smooth_l1(2), 1.5);
  EXPECT_EQ(smooth_l1(-2), 1.5);
  EXPECT_NEAR(smooth_l1(1 - 1e-9), smooth_l1(1 + 1e-9), 1e-8);
}

TEST(SmoothL1, NumericalGradientAtPointThree) {
  const std::vector<double> x{0.3};
  const auto fd = numerical_gradient([](std::span<const double> v) { return smooth_l1(v[0]); }, x);
  EXPECT_NEAR(fd[0], 0.3, 1e-9);
  EXPECT_EQ(smooth_l1_grad(0.3), 0.3);
}

TEST(RpnReg, Values) {
  const Delta4 t{0.5, 1, 2, 3};
  EXPECT_EQ(rpn_reg_loss(t, t).value, 0.0);
  EXPECT_EQ(rpn_reg_loss({0.5, 0, 0, 0}, {0, 0, 0, 0}).value, 0.125);
}

TEST(SoftmaxCe, Values) {
  const std::vector<double> equal{0.3, 0.3};
  EXPECT_NEAR(softmax_ce(equal, 0).value, std::log(2.0), 1e-15);
  EXPECT_NEAR(softmax_ce(equal, 1).value, std::log(2.0), 1e-15);
  const std::vector<double> sat{-50, 50, -50};
  EXPECT_NEAR(softmax_ce(sat, 1).value, 0.0, 1e-40);
  EXPECT_THROW(softmax_ce(sat, 3), LossError);
  EXPECT_THROW(softmax_ce(sat, -1), LossError);
  const std::vector<double> big{1000, 0};
  EXPECT_TRUE(std::isfinite(softmax_ce(big, 1).value));
}

TEST(SoftmaxCe, ShiftInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(13);
    for (auto& x : z) x = u(rng);
    auto shifted = z;
    const double c = u(rng) * 20;
    for (auto& x : shifted) x += c;
    EXPECT_NEAR(softmax_ce(z, i % 13).value, softmax_ce(shifted, i % 13).value, 1e-9);
  }
}

TEST(FastRcnn, Composition) {
  FastRcnnInputs in;
  in.logits = {0.1, 0.1};
  in.u = 1;
  in.t_u = {0.5, 0, 0, 0};
  in.v = {0, 0, 0, 0};
  EXPECT_NEAR(fast_rcnn_loss(in), std::log(2.0) + 0.125, 1e-15);
  in.lambda = 0;
  EXPECT_NEAR(fast_rcnn_loss(in), std::log(2.0), 1e-15);
  in.lambda = 1;
  in.u = 0;
  EXPECT_NEAR(fast_rcnn_loss(in), std::log(2.0), 1e-15);
}

TEST(TotalLoss, WeightedSum) {
  const LossComponents c{0.0366, 0.0112, 0.1833, 0.0261};
  EXPECT_NEAR(total_loss(c), 0.2572, 1e-12);
  EXPECT_EQ(total_loss({}), 0.0);
  EXPECT_EQ(total_loss(c, {0, 0, 0, 1}), 0.0261);
  EXPECT_THROW(total_loss(c, {1, -1, 1, 1}), LossError);
}

TEST(Relu, Elementwise) {
  const std::vector<double> x{-3, 5, 0, -0.0, 2.5};
  const auto y = relu(x);
  EXPECT_EQ(y, (std::vector<double>{0, 5, 0, 0, 2.5}));
}

TEST(NumericalGradient, Basics) {
  const std::vector<double> x{3};
  EXPECT_NEAR(numerical_gradient([](std::span<const double> v) { return v[0] * v[0]; }, x)[0], 6.0, 1e-8);
  const std::vector<double> y{1, 2, 3};
  for (double g : numerical_gradient([](std::span<const double>) { return 4.0; }, y)) EXPECT_EQ(g, 0.0);
  EXPECT_THROW(numerical_gradient([](std::span<const double>) { return 0.0; }, y, 0.0), LossError);
}

TEST(GradientCheck, LossesAgreeWithFiniteDifferences) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> prob(0.02, 0.98), delta(-3, 3), logit(-4, 4);
  for (int i = 0; i < 100; ++i) {
    const double p = prob(rng);
    const int star = i % 2;
    const std::vector<double> px{p};
    const auto fd = numerical_gradient([&](std::span<const double> v) { return bce_objectness(v[0], star).value; }, px);
    EXPECT_LE(oracle::rel_err(bce_objectness(p, star).grad, fd[0]), 1e-5);

    Delta4 t, ts;
    for (int k = 0; k < 4; ++k) {
      do {
        t[k] = delta(rng);
        ts[k] = delta(rng);
      } while (std::fabs(std::fabs(t[k] - ts[k]) - 1.0) < 1e-3);
    }
    const std::vector<double> tv(t.begin(), t.end());
    const auto fd_reg = numerical_gradient(
        [&](std::span<const double> v) { return rpn_reg_loss({v[0], v[1], v[2], v[3]}, ts).value; }, tv);
    const auto reg = rpn_reg_loss(t, ts);
    for (int k = 0; k < 4; ++k) EXPECT_LE(oracle::rel_err(reg.grad[k], fd_reg[k]), 1e-5);

    std::vector<double> z(13);
    for (auto& x : z) x = logit(rng);
    const int u = i % 13;
    const auto fd_ce = numerical_gradient([&](std::span<const double> v) { return softmax_ce(v, u).value; }, z);
    const auto ce = softmax_ce(z, u);
    for (std::size_t k = 0; k < z.size(); ++k) EXPECT_LE(oracle::rel_err(ce.grad[k], fd_ce[k]), 1e-5);

    FastRcnnInputs in{z, u, t, ts, 0.5 + (i % 4)};
    std::vector<double> packed = z;
    packed.insert(packed.end(), t.begin(), t.end());
    const auto fd_frc = numerical_gradient(
        [&](std::span<const double> v) {
          FastRcnnInputs probe = in;
          probe.logits.assign(v.begin(), v.begin() + 13);
          for (int k = 0; k < 4; ++k) probe.t_u[k] = v[13 + k];
          return fast_rcnn_loss(probe);
        },
        packed);
    const auto frc = fast_rcnn_loss_grad(in);
    EXPECT_DOUBLE_EQ(frc.value, fast_rcnn_loss(in));
    for (std::size_t k = 0; k < packed.size(); ++k) EXPECT_LE(oracle::rel_err(frc.grad[k], fd_frc[k]), 1e-5);
  }
}

TEST(Adam, ZeroGradientLeavesThetaAndAdvancesT) {
  const auto s = AdamState::fresh({1.5, -2});
  const std::vector<double> g{0, 0};
  const auto n = adam_step(s, g);
  EXPECT_EQ(n.theta, s.theta);
  EXPECT_EQ(n.t, 1u);
}

TEST(Adam, OneStepFromZero) {
  const auto s = AdamState::fresh({0});
  const std::vector<double> g{1};
  const auto n = adam_step(s, g);
  EXPECT_NEAR(n.theta[0], -0.0009999999900, 1e-15);
  // m̂ = g after one step.
  EXPECT_NEAR(n.m[0] / (1 - n.beta1), 1.0, 1e-12);
  EXPECT_EQ(s.t, 0u);  // input untouched
}

TEST(Adam, PureAndDeterministic) {
  const auto s = AdamState::fresh({0.1, 0.2, 0.3});
  const std::vector<double> g{0.5, -1, 2};
  EXPECT_EQ(adam_step(s, g), adam_step(s, g));
}

TEST(Adam, RejectsLengthMismatch) {
  const auto s = AdamState::fresh({0.1, 0.2});
  const std::vector<double> g{1};
  EXPECT_THROW(adam_step(s, g), LossError);
}

TEST(Adam, TrajectoryMatchesScalarOracle) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  auto s = AdamState::fresh({0.5, -1.25, 2.0});
  std::vector<oracle::ScalarAdam> ref(3);
  for (std::size_t i = 0; i < 3; ++i) ref[i].theta = s.theta[i];
  for (int step = 0; step < 10; ++step) {
    std::vector<double> g(3);
    for (auto& x : g) x = n(rng);
    s = adam_step(s, g);
    for (std::size_t i = 0; i < 3; ++i) {
      ref[i].step(g[i]);
      EXPECT_NEAR(s.theta[i], ref[i].theta, 1e-12);
      EXPECT_NEAR(s.m[i], ref[i].m, 1e-12);
      EXPECT_NEAR(s.v[i], ref[i].v, 1e-12);
      EXPECT_GE(s.v[i], 0.0);
    }
    EXPECT_EQ(s.t, static_cast<std::uint64_t>(step + 1));
  }
}
