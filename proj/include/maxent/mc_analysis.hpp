#pragma once

#include "maxent/product.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace maxent {

struct StateClassification {
  std::vector<Index> transient;    // reachable, outside every bottom SCC
  std::vector<Index> recurrent;    // reachable, inside a bottom SCC
  std::vector<Index> unreachable;  // not reachable from the initial state
  std::vector<Index> recurrent_nonabsorbing;
};

StateClassification classify_states(const Mc& c);

/// Entropy (bits) and expected total reward of an absorbing chain.
///
/// Values are 0 on absorbing states. A quantity is finite only when no state
/// with a positive local term can be revisited forever from the initial
/// state; otherwise the corresponding *_finite flag is false and the value
/// is +inf.
struct EvalResult {
  double entropy_bits = 0.0;
  Eigen::VectorXd nu;
  double expected_reward = 0.0;
  Eigen::VectorXd eta;
  bool finite = true;
  bool entropy_finite = true;
  bool reward_finite = true;
  double entropy_residual = 0.0;
  double reward_residual = 0.0;
  std::string diagnostic;
};

EvalResult entropy_fixed_point(const Mc& c);
EvalResult expected_total_reward(const Mc& c);
/// Both parts.
EvalResult evaluate(const Mc& c);

}  // namespace maxent
