#pragma once

#include "maxent/common.hpp"
#include "maxent/product.hpp"

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maxent {

enum class Relation { less_equal, greater_equal, equal };

struct Variable {
  std::string name;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// expr (relation) bound
struct LinearConstraint {
  AffineExpr expr;
  Relation relation = Relation::less_equal;
  double bound = 0.0;
};

/// weight * x * ln(x), weight >= 0, x >= 0 enforced by the solver.
struct EntropyTerm {
  AffineExpr argument;
  double weight = 1.0;
};

/// weight * x^2, weight >= 0.
struct SquareTerm {
  AffineExpr argument;
  double weight = 1.0;
};

/// linear + sum(entropy terms) + sum(square terms) <= 0
struct ConvexConstraint {
  std::string name;
  AffineExpr linear;
  std::vector<EntropyTerm> entropy;
  std::vector<SquareTerm> squares;
};

/// Convex program: maximize a linear objective subject to linear rows and
/// smooth convex rows built from x ln x and squares of affine expressions.
struct ConvexSubproblem {
  std::vector<Variable> variables;
  AffineExpr objective;
  std::vector<LinearConstraint> linear;
  std::vector<ConvexConstraint> convex;
  /// Optional starting point; used directly when strictly feasible.
  std::optional<Eigen::VectorXd> initial_point;

  Index add_variable(std::string name, double lower, double upper) {
    variables.push_back({std::move(name), lower, upper});
    return static_cast<Index>(variables.size()) - 1;
  }

  /// x ln x <= t (exponential-cone epigraph).
  void add_entropy_epigraph(const AffineExpr& x, Index t) {
    ConvexConstraint row;
    row.name = "epi_" + variables[static_cast<std::size_t>(t)].name;
    row.linear = AffineExpr::variable(t, -1.0);
    row.entropy.push_back({x, 1.0});
    convex.push_back(std::move(row));
  }

  Index num_variables() const { return static_cast<Index>(variables.size()); }
};

enum class SolveStatus { optimal, near_optimal, failed };

const char* to_string(SolveStatus status);

struct SubproblemSolution {
  Eigen::VectorXd values;
  double objective = 0.0;
  SolveStatus status = SolveStatus::failed;
  double max_violation = 0.0;
  /// Duality-gap bound m / t at termination.
  double gap = std::numeric_limits<double>::infinity();
  int newton_steps = 0;
  std::string message;
  /// Multipliers (minimization form): one per linear row, one per convex
  /// row, one per variable bound.
  Eigen::VectorXd linear_duals;
  Eigen::VectorXd convex_duals;
  Eigen::VectorXd lower_duals;
  Eigen::VectorXd upper_duals;
};

struct SolverOptions {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-8;
  double mu = 20.0;
  double t0 = 1.0;
  double newton_tol = 1e-6;
  int max_newton_steps = 3000;
};

/// Log-barrier interior-point method with a phase-I search when the
/// initial point is missing or not strictly feasible. Deterministic.
SubproblemSolution solve_subproblem(const ConvexSubproblem& sp, const SolverOptions& options = {});

/// Largest violation of any bound or constraint at `x` (0 when feasible).
double max_violation(const ConvexSubproblem& sp, const Eigen::Ref<const Eigen::VectorXd>& x);

struct KktReport {
  double primal_violation = 0.0;
  double complementarity = 0.0;
  double stationarity = 0.0;
  bool primal_feasible = true;
};

/// Independent check of a returned point: primal feasibility within `tol`
/// plus complementary-slackness and stationarity residuals of the duals.
KktReport kkt_check(const ConvexSubproblem& sp, const SubproblemSolution& sol, double tol = 1e-8);

/// Line-oriented text dump; see README for the grammar.
std::string dump_subproblem(const ConvexSubproblem& sp);
ConvexSubproblem parse_subproblem_dump(std::string_view text);

}  // namespace maxent
