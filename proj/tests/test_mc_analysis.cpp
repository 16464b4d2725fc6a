#include "maxent/mc_analysis.hpp"
#include "maxent/oracle.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace maxent;

namespace {

Mc ex1_uniform(Index k = 1) {
  const auto p = build_pmc(builtin_example("ex1"), k);
  return instantiate(p, support::uniform_u(p.layout));
}

Mc two_cycle() {
  Eigen::MatrixXd t(2, 2);
  t << 0.5, 0.5, 1.0, 0.0;
  return make_mc(t, Eigen::VectorXd::Zero(2), {false, false}, 0);
}

bool contains(const std::vector<Index>& v, Index x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

TEST(McAnalysis, ClassifyEx1) {
  const auto c = ex1_uniform();
  const auto cls = classify_states(c);
  EXPECT_EQ(cls.transient.size(), 3u);
  EXPECT_EQ(cls.recurrent.size(), 3u);
  for (Index s : {0, 1, 2}) EXPECT_TRUE(contains(cls.transient, s));
  EXPECT_TRUE(cls.recurrent_nonabsorbing.empty());
}

TEST(McAnalysis, ClassifyTwoCycle) {
  const auto cls = classify_states(two_cycle());
  EXPECT_EQ(cls.recurrent.size(), 2u);
  EXPECT_EQ(cls.recurrent_nonabsorbing.size(), 2u);
}

TEST(McAnalysis, ClassifyUnreachableCycle) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, 4);
  t(0, 1) = 1.0;  // 0 -> 1 (absorbing); 2 <-> 3 never entered
  t(1, 1) = 1.0;
  t(2, 3) = 1.0;
  t(3, 2) = 1.0;
  const auto c = make_mc(t, Eigen::VectorXd::Zero(4), {false, true, false, false}, 0);
  const auto cls = classify_states(c);
  EXPECT_TRUE(contains(cls.unreachable, 2));
  EXPECT_TRUE(contains(cls.unreachable, 3));
  EXPECT_TRUE(evaluate(c).finite);
}

TEST(McAnalysis, Ex1UniformValues) {
  const auto eval = evaluate(ex1_uniform());
  EXPECT_NEAR(eval.entropy_bits, 2.0, 1e-12);
  EXPECT_NEAR(eval.expected_reward, 0.5, 1e-12);
  EXPECT_TRUE(eval.finite);
  EXPECT_LE(eval.entropy_residual, 1e-10);
  EXPECT_LE(eval.reward_residual, 1e-10);
  EXPECT_NEAR(eval.entropy_bits, finite_horizon_entropy(ex1_uniform(), 3).entropy_bits, 1e-12);
}

TEST(McAnalysis, DeterministicChainHasZeroEntropy) {
  const auto p = build_pmc(builtin_example("ex2"), 2);
  Instantiation u{p.layout, Eigen::VectorXd::Zero(p.layout.size())};
  for (Index r = 0; r < p.layout.rows(); ++r) u.values(r * p.layout.actions + 1) = 1.0;
  const auto eval = evaluate(instantiate(p, u));
  EXPECT_EQ(eval.entropy_bits, 0.0);
  EXPECT_TRUE(eval.nu.isZero());
}

TEST(McAnalysis, PositiveEntropyCycleIsInfinite) {
  const auto eval = evaluate(two_cycle());
  EXPECT_FALSE(eval.entropy_finite);
  EXPECT_FALSE(eval.finite);
  EXPECT_FALSE(eval.diagnostic.empty());
}

TEST(McAnalysis, ZeroEntropyCycleStaysFinite) {
  Eigen::MatrixXd t(2, 2);
  t << 0.0, 1.0, 1.0, 0.0;
  const auto eval = evaluate(make_mc(t, Eigen::VectorXd::Zero(2), {false, false}, 0));
  EXPECT_TRUE(eval.entropy_finite);
  EXPECT_EQ(eval.entropy_bits, 0.0);
}

TEST(McAnalysis, RewardOnSecondStep) {
  const auto m = builtin_example("ex1");
  const auto p = build_pmc(m, 2);
  Instantiation u = support::uniform_u(p.layout);
  u.row(1, 0) << 1.0, 0.0;
  const auto eval = evaluate(instantiate(p, u));
  EXPECT_NEAR(eval.expected_reward, 1.0, 1e-12);
  EXPECT_NEAR(eval.entropy_bits, 1.0, 1e-12);
}

TEST(McAnalysis, ZeroRewardAndLinearity) {
  auto c = ex1_uniform(2);
  const double base = evaluate(c).expected_reward;
  c.reward *= 3.0;
  EXPECT_NEAR(evaluate(c).expected_reward, 3.0 * base, 1e-12);
  c.reward.setZero();
  EXPECT_EQ(evaluate(c).expected_reward, 0.0);
}

TEST(McAnalysis, AbsorbingValuesAreZero) {
  std::mt19937_64 rng(11);
  const auto p = build_pmc(builtin_example("ex2"), 3);
  for (int i = 0; i < 10; ++i) {
    const auto c = instantiate(p, support::random_u(p.layout, rng));
    const auto eval = evaluate(c);
    EXPECT_GE(eval.entropy_bits, 0.0);
    for (Index s = 0; s < c.size(); ++s) {
      if (!c.absorbing[static_cast<std::size_t>(s)]) continue;
      EXPECT_EQ(eval.nu(s), 0.0);
      EXPECT_EQ(eval.eta(s), 0.0);
    }
  }
}

TEST(McAnalysis, HorizonEntropyIncreasesToFixedPoint) {
  std::mt19937_64 rng(5);
  const auto p = build_pmc(builtin_example("ex2"), 2);
  const auto c = instantiate(p, support::random_u(p.layout, rng));
  const double limit = evaluate(c).entropy_bits;
  double previous = 0.0;
  for (int t = 1; t <= 9; ++t) {
    const auto h = finite_horizon_entropy(c, t);
    EXPECT_GE(h.entropy_bits, previous - 1e-12);
    EXPECT_LE(h.entropy_bits, limit + 1e-9);
    previous = h.entropy_bits;
  }
  EXPECT_NEAR(previous, limit, 1e-9);  // longest ex2 path reaches column 5 at step 8
}
