#pragma once

#include "maxent/fsc.hpp"
#include "maxent/model.hpp"
#include "maxent/product.hpp"

#include <vector>

namespace maxent {

/// Brute-force references. Enumeration is exponential in the horizon and
/// refuses horizons above kMaxHorizon.
inline constexpr int kMaxHorizon = 14;

struct HorizonEntropy {
  int horizon = 0;
  double entropy_bits = 0.0;  // H(X^T), X_1 = initial state
  long path_count = 0;
  double absorbed_mass = 0.0;  // mass of sequences ending in an absorbing state
};

HorizonEntropy finite_horizon_entropy(const Mc& c, int horizon);

/// Entropy of the sequence image under `projection` (state -> label), i.e.
/// H(f(X_1), ..., f(X_T)).
double projected_horizon_entropy(const Mc& c, int horizon, const std::vector<Index>& projection);

/// |H(X^n) - H(X_k..X_n | X^{k-1}) - H(X^{k-1})| with every term enumerated.
double chain_rule_check(const Mc& c, int n, int k);

/// V_{1,T}(s_I) by backward recursion over explicit histories:
///   V_{t,T}(s^t) = H(X_{t+1} | X^t = s^t) + sum Pr(s_{t+1} | s^t) V_{t+1,T}(s^{t+1}).
double value_recursion(const Mc& c, int horizon);

/// Expected reward collected over the first T steps, by enumeration.
double finite_horizon_reward(const Mc& c, int horizon);

/// 1 + H_b(gamma) for the two-stage example, gamma in [0.5, 1].
double ex1_closed_form(double gamma);

struct GridSearchResult {
  double entropy_bits = 0.0;
  double expected_reward = 0.0;
  Instantiation u;
  bool feasible = false;
  long evaluations = 0;
  int free_parameters = 0;
};

/// Exhaustive simplex grid over the controller rows that non-absorbing
/// product states use, then 20 rounds of coordinate refinement. Every point
/// is certified on the exact chain. At most 6 free parameters.
GridSearchResult policy_grid_search(const Pomdp& m, Index k, double gamma, double resolution);

}  // namespace maxent
