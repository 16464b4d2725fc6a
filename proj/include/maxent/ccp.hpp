#pragma once

#include "maxent/convex.hpp"
#include "maxent/fsc.hpp"
#include "maxent/model.hpp"
#include "maxent/product.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace maxent {

enum class SynthesisMode { maxent, feasibility, mdp_bound };

const char* to_string(SynthesisMode mode);
SynthesisMode parse_mode(const std::string& text);

struct SynthesisProblem {
  Pmc pmc;
  double gamma_threshold = 0.0;
  SynthesisMode mode = SynthesisMode::maxent;
};

/// Builds the pMC for `mode`. mdp_bound uses the fully observable model
/// with a single memory state and ignores `k`.
SynthesisProblem make_problem(const Pomdp& m, Index k, double gamma, SynthesisMode mode = SynthesisMode::maxent);

struct CcpConfig {
  double tau0 = 0.05;
  double tau_mult = 2.0;
  double tau_max = 100.0;
  bool schedule_tau = true;  // false keeps tau at tau0
  int max_iters = 100;
  double obj_tol = 1e-6;
  double slack_tol = 1e-6;
  int restarts = 10;
  std::uint64_t seed = 0;
  /// Non-positive means the default |S| log2 |S| and |S| max R.
  double nu_box = 0.0;
  double eta_box = 0.0;
  /// Scale a in the bilinear bound (dx/a - a*dy)^2 / 4 for nu and eta rows.
  double nu_split = 1.0;
  double eta_split = 1.0;
  /// Worker threads for restarts; 0 picks MAXENT_THREADS or the hardware count.
  int threads = 0;
  SolverOptions solver;
};

/// Linearization point of the convex-concave procedure.
struct Iterate {
  Eigen::VectorXd u;    // gamma parameters
  Eigen::VectorXd nu;   // per product state, bits
  Eigen::VectorXd eta;  // per product state
};

/// Subproblem plus the positions of each variable group. Gamma parameters
/// occupy indices [0, params). Entries are -1 when a group is absent.
struct Convexified {
  ConvexSubproblem sp;
  Index params = 0;
  std::vector<Index> nu;
  std::vector<Index> eta;
  std::vector<Index> psi;  // one per nu row, then one per eta row
  std::vector<Index> nu_row_state;
  std::vector<Index> eta_row_state;
};

/// Boxes actually used for nu and eta.
std::pair<double, double> effective_boxes(const SynthesisProblem& p, const CcpConfig& cfg);

Convexified convexify(const SynthesisProblem& p, const Iterate& at, double tau, const CcpConfig& cfg = {});

/// Random gamma rows (symmetric Dirichlet) with nu/eta from exact evaluation.
Iterate initialize(const SynthesisProblem& p, std::uint64_t seed, int restart_index = 0);

/// Exact values of the row functions at an iterate: nu rows then eta rows,
/// each as g(x) <= 0 without slack.
Eigen::VectorXd true_row_values(const SynthesisProblem& p, const Iterate& x);

struct IterationRecord {
  double tau = 0.0;
  double nu_initial = 0.0;       // solver nu(s_I) (0 in feasibility mode)
  double eta_initial = 0.0;
  double slack = 0.0;            // sum of psi returned by the solver
  double true_violation = 0.0;   // sum of max(0, g) over the original rows
  double objective = 0.0;        // subproblem objective
  int newton_steps = 0;
  SolveStatus status = SolveStatus::optimal;
};

struct RunResult {
  int restart_index = 0;
  Instantiation u;
  double entropy_bits = 0.0;
  double expected_reward = 0.0;
  bool entropy_finite = true;
  double nu_initial = 0.0;
  double slack_final = 0.0;
  bool converged = false;
  bool stable = false;  // objective change fell below obj_tol
  int iterations = 0;
  std::string message;
  /// Entry 0 is the initial point (tau = 0); entry i is the iterate produced
  /// by the i-th subproblem, solved with trace[i].tau.
  std::vector<IterationRecord> trace;
};

struct SynthesisResult {
  Instantiation best_u;
  double entropy_bits = 0.0;
  double expected_reward = 0.0;
  double nu_initial = 0.0;
  bool converged = false;
  bool entropy_finite = true;
  int iterations = 0;
  int restart_index = -1;
  double slack_final = 0.0;
  std::string message;
  std::vector<RunResult> runs;
};

RunResult run_ccp(const SynthesisProblem& p, const CcpConfig& cfg, int restart_index);

/// All restarts, merged by the highest certified entropy among runs whose
/// certified reward is at least gamma - 1e-6 (lowest restart index on ties).
SynthesisResult synthesize(const SynthesisProblem& p, const CcpConfig& cfg = {});

/// Penalized objective nu(s_I) - tau * true_violation of a trace entry.
inline double penalized(const IterationRecord& r, double tau) { return r.nu_initial - tau * r.true_violation; }

int resolve_threads(int requested);

}  // namespace maxent
