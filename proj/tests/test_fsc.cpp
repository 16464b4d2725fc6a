#include "maxent/entropy.hpp"
#include "maxent/fsc.hpp"
#include "maxent/mc_analysis.hpp"
#include "maxent/product.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace maxent;

namespace {
const std::vector<std::string> kZ{"z1"};
const std::vector<std::string> kA{"a1", "a2"};
}  // namespace

TEST(Fsc, ChainDeltaOneMemory) {
  const auto d = chain_delta(1, 1, 2);
  EXPECT_EQ(d.rows(), 2);
  EXPECT_EQ(d.cols(), 1);
  EXPECT_TRUE((d.array() == 1.0).all());
}

TEST(Fsc, ChainDeltaThreeMemory) {
  const Index nz = 2, na = 3;
  const auto d = chain_delta(3, nz, na);
  for (Index q = 0; q < 3; ++q) {
    const Index next = std::min<Index>(q + 1, 2);
    for (Index z = 0; z < nz; ++z) {
      for (Index a = 0; a < na; ++a) {
        const Index row = (q * nz + z) * na + a;
        EXPECT_EQ(d(row, next), 1.0);
        EXPECT_EQ(d.row(row).sum(), 1.0);
      }
    }
  }
  EXPECT_THROW(chain_delta(0, 1, 1), Error);
}

TEST(Fsc, LiftUniform) {
  const auto c = uniform_fsc(1, kZ, kA);
  const auto lifted = lift(c, 2);
  EXPECT_EQ(lifted.k, 2);
  EXPECT_TRUE(lifted.gamma.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.5)));
  EXPECT_TRUE(has_chain_delta(lifted));
  const auto same = lift(c, 1);
  EXPECT_EQ(same.gamma, c.gamma);
  EXPECT_EQ(same.delta, c.delta);
  EXPECT_THROW(lift(lifted, 1), Error);
}

TEST(Fsc, LiftCopiesLastRow) {
  Fsc c = uniform_fsc(2, kZ, kA);
  c.gamma << 0.3, 0.7, 1.0, 0.0;
  const auto lifted = lift(c, 4);
  EXPECT_DOUBLE_EQ(lifted.gamma(0, 0), 0.3);
  for (Index q = 1; q < 4; ++q) EXPECT_DOUBLE_EQ(lifted.gamma(q, 0), 1.0);
}

TEST(Fsc, LiftPreservesEntropyOfEx1Optimum) {
  const auto m = builtin_example("ex1");
  Fsc c = uniform_fsc(2, kZ, kA);
  c.gamma << 0.5, 0.5, 0.9, 0.1;  // constrained optimum at Gamma = 0.9
  const double h2 = evaluate(instantiate(build_pmc(m, 2), instantiation_of(c))).entropy_bits;
  const double h3 = evaluate(instantiate(build_pmc(m, 3), instantiation_of(lift(c, 3)))).entropy_bits;
  EXPECT_NEAR(h2, h3, 1e-9);
  EXPECT_NEAR(h2, 1.0 + binary_entropy(0.9), 1e-12);
}

TEST(Fsc, FromInstantiation) {
  Instantiation u{{1, 1, 2}, Eigen::Vector2d(0.3, 0.7)};
  const auto c = fsc_from_instantiation(u, kZ, kA);
  EXPECT_EQ(c.k, 1);
  EXPECT_DOUBLE_EQ(c.gamma(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(c.gamma(0, 1), 0.7);
  EXPECT_TRUE(has_chain_delta(c));

  Instantiation bad{{1, 1, 2}, Eigen::Vector2d(0.3, 0.5)};
  EXPECT_FALSE(is_well_defined(bad));
  EXPECT_THROW(fsc_from_instantiation(bad, kZ, kA), Error);
}

TEST(Fsc, ClampsTinyNegatives) {
  Instantiation u{{1, 1, 2}, Eigen::Vector2d(-5e-13, 1.0 + 5e-13)};
  const auto c = fsc_from_instantiation(u, kZ, kA);
  EXPECT_EQ(c.gamma(0, 0), 0.0);
  EXPECT_NEAR(c.gamma(0, 1), 1.0, 1e-15);
  Instantiation worse{{1, 1, 2}, Eigen::Vector2d(-1e-6, 1.0 + 1e-6)};
  EXPECT_THROW(fsc_from_instantiation(worse, kZ, kA), Error);
}

TEST(Fsc, InstantiationRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto u = support::random_u({3, 2, 3}, rng);
    const auto back = instantiation_of(fsc_from_instantiation(u, {"x", "y"}, {"p", "q", "r"}));
    EXPECT_LE((back.values - u.values).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Fsc, JsonRoundTripAndAlignment) {
  Fsc c = uniform_fsc(2, kZ, kA);
  c.gamma << 0.25, 0.75, 1.0, 0.0;
  const auto text = fsc_to_json(c);
  EXPECT_NE(text.find("\"q\": 1"), std::string::npos);
  const auto back = align_to(fsc_from_json(text), kZ, kA);
  EXPECT_EQ(back.k, 2);
  EXPECT_TRUE(back.gamma.isApprox(c.gamma));

  const auto swapped = align_to(back, kZ, {"a2", "a1"});
  EXPECT_DOUBLE_EQ(swapped.gamma(0, 0), 0.75);
  EXPECT_THROW(align_to(back, kZ, {"a1", "a3"}), Error);
  EXPECT_THROW(fsc_from_json(R"({"k":1,"delta":"free","gamma":[]})"), Error);
}
