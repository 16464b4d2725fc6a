#include "maxent/product.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace maxent;

namespace {

const PmcEntry* find_entry(const Pmc& p, Index from, Index to) {
  for (const auto& e : p.trans[static_cast<std::size_t>(from)]) {
    if (e.target == to) return &e;
  }
  return nullptr;
}

}  // namespace

TEST(Product, Ex1TwoMemoryStructure) {
  const auto m = builtin_example("ex1");
  const auto p = build_pmc(m, 2);
  EXPECT_EQ(p.size(), 12);
  EXPECT_EQ(p.layout.size(), 4);
  EXPECT_EQ(p.initial, p.index(m.state_index("sI"), 0));

  const auto* to_s2 = find_entry(p, p.initial, p.index(m.state_index("s2"), 1));
  const auto* to_s3 = find_entry(p, p.initial, p.index(m.state_index("s3"), 1));
  ASSERT_NE(to_s2, nullptr);
  ASSERT_NE(to_s3, nullptr);
  EXPECT_EQ(p.trans[static_cast<std::size_t>(p.initial)].size(), 2u);
  ASSERT_EQ(to_s2->expr.terms.size(), 1u);
  EXPECT_EQ(to_s2->expr.terms[0].first, p.layout.index(0, 0, 0));
  EXPECT_EQ(to_s2->expr.terms[0].second, 1.0);
  EXPECT_EQ(to_s3->expr.terms[0].first, p.layout.index(0, 0, 1));
  EXPECT_EQ(to_s2->expr.constant, 0.0);
}

TEST(Product, SymbolicRowsSumToOne) {
  for (const char* name : {"ex1", "ex2"}) {
    for (Index k = 1; k <= 3; ++k) {
      const auto p = build_pmc(builtin_example(name), k);
      for (Index s = 0; s < p.size(); ++s) EXPECT_EQ(symbolic_row_defect(p, s), 0.0) << name << " " << s;
    }
  }
}

TEST(Product, MemoryOneStaysInFirstState) {
  const auto m = builtin_example("ex2");
  const auto p = build_pmc(m, 1);
  EXPECT_EQ(p.size(), m.num_states());
  for (Index s = 0; s < p.size(); ++s) {
    for (const auto& e : p.trans[static_cast<std::size_t>(s)]) EXPECT_EQ(p.memory_state(e.target), 0);
  }
}

TEST(Product, Ex2FiveMemoryCounts) {
  const auto p = build_pmc(builtin_example("ex2"), 5);
  EXPECT_EQ(p.size(), 75);
  EXPECT_EQ(p.layout.size(), 15);
  EXPECT_THROW(build_pmc(builtin_example("ex2"), 0), Error);
}

TEST(Product, AbsorbingFlags) {
  const auto m = builtin_example("ex1");
  const auto p = build_pmc(m, 2);
  for (Index s = 0; s < p.size(); ++s) {
    const auto name = m.states[static_cast<std::size_t>(p.model_state(s))];
    const bool model_absorbing = name == "s4" || name == "s5" || name == "s6";
    EXPECT_EQ(p.absorbing[static_cast<std::size_t>(s)], model_absorbing);
    EXPECT_EQ(p.self_loop[static_cast<std::size_t>(s)], model_absorbing && p.memory_state(s) == 1);
  }
}

TEST(Product, InstantiateUniformOneMemory) {
  const auto m = builtin_example("ex1");
  const auto p = build_pmc(m, 1);
  const auto c = instantiate(p, support::uniform_u(p.layout));
  EXPECT_DOUBLE_EQ(c.transition(p.initial, m.state_index("s2")), 0.5);
  EXPECT_DOUBLE_EQ(c.transition(p.initial, m.state_index("s3")), 0.5);
  EXPECT_DOUBLE_EQ(c.local_entropy(p.initial), 1.0);
  for (Index s = 0; s < c.size(); ++s) {
    if (c.absorbing[static_cast<std::size_t>(s)]) EXPECT_EQ(c.local_entropy(s), 0.0);
  }
}

TEST(Product, InstantiateRewardsSecondStep) {
  const auto m = builtin_example("ex1");
  const auto p = build_pmc(m, 2);
  Instantiation u = support::uniform_u(p.layout);
  u.row(1, 0) << 1.0, 0.0;
  const auto c = instantiate(p, u);
  EXPECT_DOUBLE_EQ(c.reward(p.index(m.state_index("s2"), 1)), 1.0);
  EXPECT_DOUBLE_EQ(c.reward(p.index(m.state_index("s3"), 1)), 1.0);
  EXPECT_DOUBLE_EQ(c.reward(p.initial), 0.0);
}

TEST(Product, RejectsIllDefined) {
  const auto p = build_pmc(builtin_example("ex1"), 1);
  Instantiation u{p.layout, Eigen::Vector2d(-0.5, 1.5)};
  EXPECT_THROW(instantiate(p, u), Error);
  Instantiation short_row{p.layout, Eigen::Vector2d(0.5, 0.4)};
  EXPECT_THROW(instantiate(p, short_row), Error);
}

TEST(Product, DeterministicEdgesFollowModel) {
  const auto m = builtin_example("ex2");
  const auto p = build_pmc(m, 2);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Instantiation u{p.layout, Eigen::VectorXd::Zero(p.layout.size())};
    std::uniform_int_distribution<Index> pick(0, p.layout.actions - 1);
    for (Index r = 0; r < p.layout.rows(); ++r) u.values(r * p.layout.actions + pick(rng)) = 1.0;
    const auto c = instantiate(p, u);
    for (Index s = 0; s < c.size(); ++s) {
      for (Index t = 0; t < c.size(); ++t) {
        if (c.transition(s, t) <= 0.0) continue;
        double any = 0.0;
        for (const auto& pa : m.transition) any += pa(p.model_state(s), p.model_state(t));
        EXPECT_GT(any, 0.0);
      }
    }
  }
}

TEST(Product, DotExport) {
  const auto p = build_pmc(builtin_example("ex1"), 1);
  const auto dot = to_dot(instantiate(p, support::uniform_u(p.layout)));
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_NE(dot.find("0.500000"), std::string::npos);
}
