#include "maxent/product.hpp"

#include "maxent/entropy.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace maxent {

namespace {

constexpr double kInstantiateTol = 1e-9;

}  // namespace

Pmc build_pmc(const Pomdp& m, Index k) {
  if (k < 1) throw Error("memory", "memory size must be at least 1");
  Pmc p;
  p.num_model_states = m.num_states();
  p.memory = k;
  p.layout = {k, m.num_observations(), m.num_actions()};
  p.initial = p.index(m.initial, 0);
  p.observations = m.observations;
  p.actions = m.actions;

  const Index n = m.num_states() * k;
  p.trans.resize(static_cast<std::size_t>(n));
  p.trans_by_action.assign(static_cast<std::size_t>(n),
                           std::vector<std::vector<PmcEntry>>(static_cast<std::size_t>(m.num_actions())));
  p.reward_expr.resize(static_cast<std::size_t>(n));
  p.absorbing.resize(static_cast<std::size_t>(n));
  p.self_loop.resize(static_cast<std::size_t>(n));
  p.state_names.resize(static_cast<std::size_t>(n));

  const auto absorbing = absorbing_mask(m);
  for (Index s = 0; s < m.num_states(); ++s) {
    for (Index q = 0; q < k; ++q) {
      const Index i = p.index(s, q);
      const Index next_q = std::min(q + 1, k - 1);
      const auto ui = static_cast<std::size_t>(i);
      p.state_names[ui] = "<" + m.states[static_cast<std::size_t>(s)] + "," + std::to_string(q + 1) + ">";
      p.absorbing[ui] = absorbing[static_cast<std::size_t>(s)];
      p.self_loop[ui] = p.absorbing[ui] && next_q == q;

      std::map<Index, AffineExpr> merged;
      for (Index a = 0; a < m.num_actions(); ++a) {
        const auto& matrix = m.transition[static_cast<std::size_t>(a)];
        auto& by_action = p.trans_by_action[ui][static_cast<std::size_t>(a)];
        for (Index t = 0; t < m.num_states(); ++t) {
          if (matrix(s, t) == 0.0) continue;
          AffineExpr expr;
          for (Index z = 0; z < m.num_observations(); ++z) {
            const double coefficient = m.observation(s, z) * matrix(s, t);
            if (coefficient != 0.0) expr.add_term(p.layout.index(q, z, a), coefficient);
          }
          if (expr.terms.empty()) continue;
          const Index target = p.index(t, next_q);
          by_action.push_back({target, expr});
          merged[target] += expr;
          if (m.reward(s, a) != 0.0) p.reward_expr[ui] += m.reward(s, a) * expr;
        }
      }
      for (auto& [target, expr] : merged) p.trans[ui].push_back({target, std::move(expr)});
    }
  }
  return p;
}

double symbolic_row_defect(const Pmc& p, Index state) {
  AffineExpr sum;
  for (const auto& entry : p.trans[static_cast<std::size_t>(state)]) sum += entry.expr;
  Eigen::VectorXd coefficients = Eigen::VectorXd::Zero(p.layout.size());
  for (const auto& [id, c] : sum.terms) coefficients(id) = c;

  double reduced = sum.constant;
  double spread = 0.0;
  for (Index q = 0; q < p.layout.memory; ++q) {
    for (Index z = 0; z < p.layout.observations; ++z) {
      const auto row = coefficients.segment(p.layout.row(q, z) * p.layout.actions, p.layout.actions);
      reduced += row(0);
      spread += (row.array() - row(0)).abs().sum();
    }
  }
  return std::abs(reduced - 1.0) + spread;
}

Mc make_mc(Eigen::MatrixXd transition, Eigen::VectorXd reward, std::vector<bool> absorbing, Index initial) {
  Mc c;
  c.transition = std::move(transition);
  c.reward = std::move(reward);
  c.absorbing = std::move(absorbing);
  c.initial = initial;
  c.local_entropy.resize(c.size());
  for (Index i = 0; i < c.size(); ++i) {
    c.local_entropy(i) = c.absorbing[static_cast<std::size_t>(i)] ? 0.0 : entropy_bits(c.transition.row(i));
    c.names.push_back("x" + std::to_string(i));
  }
  return c;
}

Mc instantiate(const Pmc& p, const Instantiation& u) {
  if (u.layout != p.layout || u.values.size() != p.layout.size()) {
    throw Error("mismatch", "instantiation does not match the pMC parameters");
  }
  const Index n = p.size();
  Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd reward(n);
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (const auto& entry : p.trans[ui]) {
      const double v = entry.expr.evaluate(u.values);
      if (!std::isfinite(v) || v < -kInstantiateTol) {
        throw Error("ill_defined", "negative transition probability out of " + p.state_names[ui]);
      }
      transition(i, entry.target) = std::max(v, 0.0);
    }
    const double sum = transition.row(i).sum();
    if (std::abs(sum - 1.0) > kInstantiateTol) {
      throw Error("ill_defined", "transition row of " + p.state_names[ui] + " does not sum to 1");
    }
    transition.row(i) /= sum;
    reward(i) = p.reward_expr[ui].evaluate(u.values);
  }
  Mc c = make_mc(std::move(transition), std::move(reward), p.absorbing, p.initial);
  c.names = p.state_names;
  return c;
}

std::string to_dot(const Mc& c) {
  std::ostringstream out;
  out << "digraph mc {\n";
  for (Index i = 0; i < c.size(); ++i) {
    out << "  " << i << " [label=\"" << c.names[static_cast<std::size_t>(i)] << "\""
        << (i == c.initial ? ", shape=doublecircle" : "") << "];\n";
  }
  char label[32];
  for (Index i = 0; i < c.size(); ++i) {
    for (Index j = 0; j < c.size(); ++j) {
      if (c.transition(i, j) <= 0.0) continue;
      std::snprintf(label, sizeof(label), "%.6f", c.transition(i, j));
      out << "  " << i << " -> " << j << " [label=\"" << label << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace maxent
