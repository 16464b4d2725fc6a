#pragma once

#include "maxent/common.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace maxent {

/// Index scheme for the decision parameters gamma_a^{q,z}.
///
/// Parameters are laid out row by row: one simplex row per (q, z), one entry
/// per action inside it.
struct ParamLayout {
  Index memory = 1;
  Index observations = 1;
  Index actions = 1;

  Index rows() const { return memory * observations; }
  Index size() const { return rows() * actions; }
  Index row(Index q, Index z) const { return q * observations + z; }
  Index index(Index q, Index z, Index a) const { return row(q, z) * actions + a; }

  bool operator==(const ParamLayout&) const = default;
};

/// Assignment of values to the gamma parameters of a chain-memory pMC.
struct Instantiation {
  ParamLayout layout;
  Eigen::VectorXd values;

  double operator()(Index q, Index z, Index a) const { return values(layout.index(q, z, a)); }
  auto row(Index q, Index z) const { return values.segment(layout.row(q, z) * layout.actions, layout.actions); }
  auto row(Index q, Index z) { return values.segment(layout.row(q, z) * layout.actions, layout.actions); }
};

/// True when every simplex row sums to 1 within `tol` and no entry is below
/// -1e-12.
bool is_well_defined(const Instantiation& u, double tol = 1e-9);

/// Finite-state controller (Q, q1, gamma, delta).
struct Fsc {
  Index k = 1;
  std::vector<std::string> observations;
  std::vector<std::string> actions;
  /// gamma(row(q, z), a) = gamma(a | q, z)
  Eigen::MatrixXd gamma;
  /// delta((row(q, z)) * |A| + a, q') = delta(q' | q, z, a)
  Eigen::MatrixXd delta;
  Index initial_memory = 0;

  ParamLayout layout() const {
    return {k, static_cast<Index>(observations.size()), static_cast<Index>(actions.size())};
  }
};

/// Chain memory update q_i -> q_{i+1}, q_k -> q_k regardless of (z, a).
/// Rows follow Fsc::delta.
Eigen::MatrixXd chain_delta(Index k, Index num_observations, Index num_actions);

bool has_chain_delta(const Fsc& c);

/// Embeds a chain-memory k-FSC into target_k memory states; rows at and
/// beyond the last memory state copy the old last row.
Fsc lift(const Fsc& c, Index target_k);

/// Controller described by a well-defined instantiation. Entries in
/// [-1e-12, 0) are clamped and the row renormalized; larger violations throw.
Fsc fsc_from_instantiation(const Instantiation& u, const std::vector<std::string>& observations,
                           const std::vector<std::string>& actions);

Instantiation instantiation_of(const Fsc& c);

/// Uniform decision rows with chain memory.
Fsc uniform_fsc(Index k, const std::vector<std::string>& observations, const std::vector<std::string>& actions);

/// {k, delta: "chain", gamma: [{q, z, dist: {action: prob}}]}, q is 1-based.
std::string fsc_to_json(const Fsc& c);

/// Reorders gamma to the given alphabets. Throws "mismatch" unless both
/// alphabets are the same sets.
Fsc align_to(const Fsc& c, const std::vector<std::string>& observations, const std::vector<std::string>& actions);
Fsc fsc_from_json(const std::string& text);

}  // namespace maxent
