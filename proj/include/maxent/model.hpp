#pragma once

#include "maxent/common.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace maxent {

/// Finite POMDP with dense per-action transition matrices.
///
/// All actions are available in every state. Probabilities are kept exactly
/// as they were supplied; nothing is renormalized.
struct Pomdp {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::string> observations;
  Index initial = 0;
  /// transition[a](s, s') = P(s' | s, a)
  std::vector<Eigen::MatrixXd> transition;
  /// observation(s, z) = O(z | s)
  Eigen::MatrixXd observation;
  /// reward(s, a) >= 0
  Eigen::MatrixXd reward;

  Index num_states() const { return static_cast<Index>(states.size()); }
  Index num_actions() const { return static_cast<Index>(actions.size()); }
  Index num_observations() const { return static_cast<Index>(observations.size()); }

  Index state_index(std::string_view id) const;
  Index action_index(std::string_view id) const;
  Index observation_index(std::string_view id) const;

  bool operator==(const Pomdp& other) const;
};

struct Issue {
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;
  std::vector<Index> absorbing_states;
  bool is_dag_to_absorbing = false;

  bool ok() const { return errors.empty(); }
};

/// Parses the JSON model format. Throws maxent::Error with codes
/// "syntax", "schema", "unknown_id", "duplicate", "distribution_sum",
/// "missing_entry", "negative_reward", "initial_observation".
Pomdp parse_model(std::string_view text);
Pomdp load_model(const std::filesystem::path& path);

/// Canonical JSON form; parse_model(serialize_model(m)) == m.
std::string serialize_model(const Pomdp& m);

/// Per-state flag: P(s, a, s) = 1 for every action.
std::vector<bool> absorbing_mask(const Pomdp& m);

ValidationReport validate(const Pomdp& m);
std::string report_to_json(const ValidationReport& report, const Pomdp& m);

/// Same model with Z = S and a point-mass observation on the current state.
Pomdp to_fully_observable(const Pomdp& m);

/// "ex1" (six-state reward trade-off model) or "ex2" (15-state grid).
Pomdp builtin_example(std::string_view name);

/// Accepts either a file path or "builtin:<name>".
Pomdp load_model_or_builtin(const std::string& source);

}  // namespace maxent
