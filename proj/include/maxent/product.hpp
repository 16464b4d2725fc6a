#pragma once

#include "maxent/common.hpp"
#include "maxent/fsc.hpp"
#include "maxent/model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace maxent {

/// constant + sum_i coefficient_i * x_i, with terms sorted by variable id.
template <typename Scalar>
struct BasicAffineExpr {
  Scalar constant{0};
  std::vector<std::pair<Index, Scalar>> terms;

  BasicAffineExpr() = default;
  explicit BasicAffineExpr(Scalar c) : constant(c) {}

  static BasicAffineExpr variable(Index id, Scalar coefficient = Scalar(1)) {
    BasicAffineExpr e;
    e.add_term(id, coefficient);
    return e;
  }

  void add_term(Index id, Scalar coefficient) {
    auto it = std::lower_bound(terms.begin(), terms.end(), id,
                               [](const auto& term, Index key) { return term.first < key; });
    if (it != terms.end() && it->first == id) {
      it->second += coefficient;
    } else {
      terms.insert(it, {id, coefficient});
    }
  }

  BasicAffineExpr& operator+=(const BasicAffineExpr& other) {
    constant += other.constant;
    for (const auto& [id, c] : other.terms) add_term(id, c);
    return *this;
  }

  BasicAffineExpr& operator*=(Scalar factor) {
    constant *= factor;
    for (auto& term : terms) term.second *= factor;
    return *this;
  }

  friend BasicAffineExpr operator+(BasicAffineExpr lhs, const BasicAffineExpr& rhs) { return lhs += rhs; }
  friend BasicAffineExpr operator-(BasicAffineExpr lhs, BasicAffineExpr rhs) {
    rhs *= Scalar(-1);
    return lhs += rhs;
  }
  friend BasicAffineExpr operator*(Scalar factor, BasicAffineExpr e) { return e *= factor; }

  /// Drops terms whose coefficient is exactly zero.
  void prune() {
    terms.erase(std::remove_if(terms.begin(), terms.end(), [](const auto& t) { return t.second == Scalar(0); }),
                terms.end());
  }

  bool is_constant() const {
    return std::all_of(terms.begin(), terms.end(), [](const auto& t) { return t.second == Scalar(0); });
  }

  template <typename Derived>
  Scalar evaluate(const Eigen::DenseBase<Derived>& x) const {
    Scalar v = constant;
    for (const auto& [id, c] : terms) v += c * x(id);
    return v;
  }
};

using AffineExpr = BasicAffineExpr<double>;

struct PmcEntry {
  Index target = 0;
  AffineExpr expr;
};

/// Parametric Markov chain induced by a POMDP and a chain-memory k-FSC
/// template. Product state <s, q> has index s * k + q.
struct Pmc {
  Index num_model_states = 0;
  Index memory = 1;
  ParamLayout layout;
  Index initial = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> observations;
  std::vector<std::string> actions;
  /// trans[s] lists successors with their affine probability expressions.
  std::vector<std::vector<PmcEntry>> trans;
  /// trans_by_action[s][a] is the per-action contribution.
  std::vector<std::vector<std::vector<PmcEntry>>> trans_by_action;
  /// Expected immediate reward as an affine function of gamma.
  std::vector<AffineExpr> reward_expr;
  /// Product states sitting on an absorbing model state.
  std::vector<bool> absorbing;
  /// Product states whose only successor is themselves (absorbing model
  /// state and last memory state).
  std::vector<bool> self_loop;

  Index size() const { return static_cast<Index>(trans.size()); }
  Index index(Index s, Index q) const { return s * memory + q; }
  Index model_state(Index product) const { return product / memory; }
  Index memory_state(Index product) const { return product % memory; }
};

Pmc build_pmc(const Pomdp& m, Index k);

/// Sum of the row's expressions after using sum_a gamma_a^{q,z} = 1 on each
/// simplex row. Returns the residual |reduced sum - 1|, or infinity when the
/// coefficients do not collapse onto whole simplex rows.
double symbolic_row_defect(const Pmc& p, Index state);

/// Concrete Markov chain over indexed states.
struct Mc {
  Eigen::MatrixXd transition;
  Eigen::VectorXd local_entropy;  // bits
  Eigen::VectorXd reward;
  std::vector<bool> absorbing;
  Index initial = 0;
  std::vector<std::string> names;

  Index size() const { return transition.rows(); }
};

/// Builds an Mc from a row-stochastic matrix, filling local entropies.
Mc make_mc(Eigen::MatrixXd transition, Eigen::VectorXd reward, std::vector<bool> absorbing, Index initial);

/// Evaluates every expression at u. Throws "ill_defined" if an entry is
/// below -1e-9 or a row misses 1 by more than 1e-9.
Mc instantiate(const Pmc& p, const Instantiation& u);

/// DOT digraph; edge labels are probabilities with 6 decimals.
std::string to_dot(const Mc& c);

}  // namespace maxent
