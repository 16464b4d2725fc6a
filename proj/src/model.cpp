#include "maxent/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace maxent {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kParseSumTol = 1e-9;
constexpr double kExactSumTol = 1e-12;

Index find_id(const std::vector<std::string>& ids, std::string_view id, const char* kind) {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) {
    throw Error("unknown_id", std::string("unknown ") + kind + " id '" + std::string(id) + "'");
  }
  return static_cast<Index>(it - ids.begin());
}

std::vector<std::string> read_id_list(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw Error("schema", std::string("missing array '") + key + "'");
  }
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& v : doc[key]) {
    if (!v.is_string()) throw Error("schema", std::string("'") + key + "' entries must be strings");
    auto id = v.get<std::string>();
    if (!seen.insert(id).second) {
      throw Error("duplicate", std::string("duplicate id '") + id + "' in '" + key + "'");
    }
    ids.push_back(std::move(id));
  }
  if (ids.empty()) throw Error("schema", std::string("'") + key + "' must not be empty");
  return ids;
}

double parse_number_text(const std::string& text, const std::string& context) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error("schema", "malformed probability '" + text + "' in " + context);
  }
  if (used != text.size()) throw Error("schema", "malformed probability '" + text + "' in " + context);
  return value;
}

/// JSON number, "p/q" fraction, or a decimal string.
double parse_probability(const json& v, const std::string& context) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw Error("schema", "probability must be a number or string in " + context);
  const auto text = v.get<std::string>();
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_number_text(text, context);
  const double num = parse_number_text(text.substr(0, slash), context);
  const double den = parse_number_text(text.substr(slash + 1), context);
  if (den == 0.0) throw Error("schema", "zero denominator in '" + text + "' in " + context);
  return num / den;
}

const json& require(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error("schema", std::string("missing key '") + key + "' in " + context);
  }
  return obj[key];
}

std::string require_string(const json& obj, const char* key, const std::string& context) {
  const auto& v = require(obj, key, context);
  if (!v.is_string()) throw Error("schema", std::string("'") + key + "' must be a string in " + context);
  return v.get<std::string>();
}

void check_distribution(const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::string& context) {
  for (Index i = 0; i < row.size(); ++i) {
    if (!std::isfinite(row(i)) || row(i) < 0.0) {
      throw Error("distribution_sum", "negative or non-finite probability in " + context);
    }
  }
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > kParseSumTol) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "distribution in " << context << " sums to " << sum;
    throw Error("distribution_sum", msg.str());
  }
}

void check_initial_observation(const Pomdp& m) {
  const auto row = m.observation.row(m.initial);
  Index support = 0;
  for (Index z = 0; z < row.size(); ++z) {
    if (row(z) > 0.0) ++support;
  }
  if (support != 1 || std::abs(row.maxCoeff() - 1.0) > kParseSumTol) {
    throw Error("initial_observation",
                "initial state '" + m.states[m.initial] + "' must emit a single observation with probability 1");
  }
}

}  // namespace

Index Pomdp::state_index(std::string_view id) const { return find_id(states, id, "state"); }
Index Pomdp::action_index(std::string_view id) const { return find_id(actions, id, "action"); }
Index Pomdp::observation_index(std::string_view id) const { return find_id(observations, id, "observation"); }

bool Pomdp::operator==(const Pomdp& other) const {
  if (states != other.states || actions != other.actions || observations != other.observations ||
      initial != other.initial || transition.size() != other.transition.size()) {
    return false;
  }
  for (std::size_t a = 0; a < transition.size(); ++a) {
    if (transition[a] != other.transition[a]) return false;
  }
  return observation == other.observation && reward == other.reward;
}

Pomdp parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error("syntax", "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error("schema", "model document must be a JSON object");

  Pomdp m;
  m.states = read_id_list(doc, "states");
  m.actions = read_id_list(doc, "actions");
  m.observations = read_id_list(doc, "observations");
  m.initial = m.state_index(require_string(doc, "initial", "model"));

  const Index n = m.num_states();
  const Index na = m.num_actions();
  const Index nz = m.num_observations();

  m.transition.assign(static_cast<std::size_t>(na), Eigen::MatrixXd::Zero(n, n));
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen_transition =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, na, false);
  const auto& transitions = require(doc, "transitions", "model");
  if (!transitions.is_array()) throw Error("schema", "'transitions' must be an array");
  for (const auto& entry : transitions) {
    const auto from = m.state_index(require_string(entry, "from", "transition"));
    const auto action = m.action_index(require_string(entry, "action", "transition"));
    const std::string context = "transition (" + m.states[from] + ", " + m.actions[action] + ")";
    if (seen_transition(from, action)) throw Error("duplicate", "duplicate " + context);
    seen_transition(from, action) = true;
    const auto& to = require(entry, "to", context);
    if (!to.is_object()) throw Error("schema", "'to' must be an object in " + context);
    auto& matrix = m.transition[static_cast<std::size_t>(action)];
    for (const auto& [target, prob] : to.items()) {
      matrix(from, m.state_index(target)) = parse_probability(prob, context);
    }
    check_distribution(matrix.row(from), context);
  }
  for (Index s = 0; s < n; ++s) {
    for (Index a = 0; a < na; ++a) {
      if (!seen_transition(s, a)) {
        throw Error("missing_entry", "no transition for (" + m.states[s] + ", " + m.actions[a] + ")");
      }
    }
  }

  m.observation = Eigen::MatrixXd::Zero(n, nz);
  if (!doc.contains("observation_fn")) {
    if (nz != 1) throw Error("missing_entry", "'observation_fn' may only be omitted with a single observation");
    m.observation.setOnes();
  } else {
    const auto& obs = doc["observation_fn"];
    if (!obs.is_array()) throw Error("schema", "'observation_fn' must be an array");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& entry : obs) {
      const auto s = m.state_index(require_string(entry, "state", "observation_fn"));
      const std::string context = "observation_fn (" + m.states[s] + ")";
      if (seen[static_cast<std::size_t>(s)]) throw Error("duplicate", "duplicate " + context);
      seen[static_cast<std::size_t>(s)] = true;
      const auto& dist = require(entry, "dist", context);
      if (!dist.is_object()) throw Error("schema", "'dist' must be an object in " + context);
      for (const auto& [z, prob] : dist.items()) {
        m.observation(s, m.observation_index(z)) = parse_probability(prob, context);
      }
      check_distribution(m.observation.row(s), context);
    }
    for (Index s = 0; s < n; ++s) {
      if (!seen[static_cast<std::size_t>(s)]) {
        throw Error("missing_entry", "no observation distribution for state '" + m.states[s] + "'");
      }
    }
  }

  m.reward = Eigen::MatrixXd::Zero(n, na);
  if (doc.contains("rewards")) {
    const auto& rewards = doc["rewards"];
    if (!rewards.is_array()) throw Error("schema", "'rewards' must be an array");
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, na, false);
    for (const auto& entry : rewards) {
      const auto s = m.state_index(require_string(entry, "state", "rewards"));
      const auto a = m.action_index(require_string(entry, "action", "rewards"));
      const std::string context = "reward (" + m.states[s] + ", " + m.actions[a] + ")";
      if (seen(s, a)) throw Error("duplicate", "duplicate " + context);
      seen(s, a) = true;
      const double value = parse_probability(require(entry, "value", context), context);
      if (!std::isfinite(value) || value < 0.0) throw Error("negative_reward", "negative reward in " + context);
      m.reward(s, a) = value;
    }
  }

  check_initial_observation(m);
  return m;
}

Pomdp load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read model file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

std::string serialize_model(const Pomdp& m) {
  ordered_json doc;
  doc["states"] = m.states;
  doc["initial"] = m.states[m.initial];
  doc["actions"] = m.actions;
  doc["observations"] = m.observations;
  ordered_json transitions = ordered_json::array();
  for (Index s = 0; s < m.num_states(); ++s) {
    for (Index a = 0; a < m.num_actions(); ++a) {
      ordered_json to = ordered_json::object();
      const auto& matrix = m.transition[static_cast<std::size_t>(a)];
      for (Index t = 0; t < m.num_states(); ++t) {
        if (matrix(s, t) != 0.0) to[m.states[t]] = matrix(s, t);
      }
      transitions.push_back({{"from", m.states[s]}, {"action", m.actions[a]}, {"to", to}});
    }
  }
  doc["transitions"] = transitions;
  ordered_json obs = ordered_json::array();
  for (Index s = 0; s < m.num_states(); ++s) {
    ordered_json dist = ordered_json::object();
    for (Index z = 0; z < m.num_observations(); ++z) {
      if (m.observation(s, z) != 0.0) dist[m.observations[z]] = m.observation(s, z);
    }
    obs.push_back({{"state", m.states[s]}, {"dist", dist}});
  }
  doc["observation_fn"] = obs;
  ordered_json rewards = ordered_json::array();
  for (Index s = 0; s < m.num_states(); ++s) {
    for (Index a = 0; a < m.num_actions(); ++a) {
      if (m.reward(s, a) != 0.0) {
        rewards.push_back({{"state", m.states[s]}, {"action", m.actions[a]}, {"value", m.reward(s, a)}});
      }
    }
  }
  doc["rewards"] = rewards;
  return doc.dump(2) + "\n";
}

std::vector<bool> absorbing_mask(const Pomdp& m) {
  std::vector<bool> mask(static_cast<std::size_t>(m.num_states()), true);
  for (Index s = 0; s < m.num_states(); ++s) {
    for (const auto& matrix : m.transition) {
      if (matrix(s, s) < 1.0 - kExactSumTol) {
        mask[static_cast<std::size_t>(s)] = false;
        break;
      }
    }
  }
  return mask;
}

ValidationReport validate(const Pomdp& m) {
  ValidationReport report;
  const Index n = m.num_states();

  auto check_row = [&](const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::string& context) {
    if ((row.array() < 0.0).any()) {
      report.errors.push_back({"distribution_sum", "negative probability in " + context});
      return;
    }
    const double dev = std::abs(row.sum() - 1.0);
    if (dev > kParseSumTol) {
      report.errors.push_back({"distribution_sum", context + " does not sum to 1"});
    } else if (dev > kExactSumTol) {
      report.warnings.push_back({"distribution_sum_inexact", context + " sums to 1 only within 1e-9"});
    }
  };
  for (Index a = 0; a < m.num_actions(); ++a) {
    for (Index s = 0; s < n; ++s) {
      check_row(m.transition[static_cast<std::size_t>(a)].row(s),
                "transition (" + m.states[s] + ", " + m.actions[a] + ")");
    }
  }
  for (Index s = 0; s < n; ++s) check_row(m.observation.row(s), "observation_fn (" + m.states[s] + ")");
  if ((m.reward.array() < 0.0).any()) report.errors.push_back({"negative_reward", "negative reward entry"});
  try {
    check_initial_observation(m);
  } catch (const Error& e) {
    report.errors.push_back({e.code(), e.what()});
  }

  const auto absorbing = absorbing_mask(m);
  for (Index s = 0; s < n; ++s) {
    if (absorbing[static_cast<std::size_t>(s)]) report.absorbing_states.push_back(s);
  }

  // Kahn's algorithm on the non-absorbing subgraph.
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<Index>> succ(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) {
    if (absorbing[static_cast<std::size_t>(s)]) continue;
    for (Index t = 0; t < n; ++t) {
      if (absorbing[static_cast<std::size_t>(t)]) continue;
      bool edge = false;
      for (const auto& matrix : m.transition) edge = edge || matrix(s, t) > 0.0;
      if (edge) {
        succ[static_cast<std::size_t>(s)].push_back(t);
        ++indegree[static_cast<std::size_t>(t)];
      }
    }
  }
  std::queue<Index> ready;
  Index remaining = 0;
  for (Index s = 0; s < n; ++s) {
    if (absorbing[static_cast<std::size_t>(s)]) continue;
    ++remaining;
    if (indegree[static_cast<std::size_t>(s)] == 0) ready.push(s);
  }
  while (!ready.empty()) {
    const auto s = ready.front();
    ready.pop();
    --remaining;
    for (auto t : succ[static_cast<std::size_t>(s)]) {
      if (--indegree[static_cast<std::size_t>(t)] == 0) ready.push(t);
    }
  }
  report.is_dag_to_absorbing = remaining == 0 && !report.absorbing_states.empty();
  if (!report.is_dag_to_absorbing) {
    report.warnings.push_back({"not_dag_to_absorbing",
                               "transition graph has cycles outside the absorbing states; "
                               "finite entropy depends on the controller"});
  }
  return report;
}

std::string report_to_json(const ValidationReport& report, const Pomdp& m) {
  ordered_json doc;
  auto issues = [](const std::vector<Issue>& list) {
    ordered_json out = ordered_json::array();
    for (const auto& issue : list) out.push_back({{"code", issue.code}, {"message", issue.message}});
    return out;
  };
  doc["ok"] = report.ok();
  doc["errors"] = issues(report.errors);
  doc["warnings"] = issues(report.warnings);
  ordered_json absorbing = ordered_json::array();
  for (auto s : report.absorbing_states) absorbing.push_back(m.states[static_cast<std::size_t>(s)]);
  doc["absorbing_states"] = absorbing;
  doc["is_dag_to_absorbing"] = report.is_dag_to_absorbing;
  return doc.dump(2) + "\n";
}

Pomdp to_fully_observable(const Pomdp& m) {
  Pomdp fo = m;
  fo.observations = m.states;
  fo.observation = Eigen::MatrixXd::Identity(m.num_states(), m.num_states());
  return fo;
}

namespace {

Pomdp make_deterministic(std::vector<std::string> states, std::string initial, std::vector<std::string> actions,
                         const std::map<std::pair<std::string, std::string>, std::string>& edges) {
  Pomdp m;
  m.states = std::move(states);
  m.actions = std::move(actions);
  m.observations = {"z1"};
  m.initial = m.state_index(initial);
  const Index n = m.num_states();
  m.transition.assign(m.actions.size(), Eigen::MatrixXd::Zero(n, n));
  for (const auto& [key, target] : edges) {
    m.transition[static_cast<std::size_t>(m.action_index(key.second))](m.state_index(key.first),
                                                                       m.state_index(target)) = 1.0;
  }
  m.observation = Eigen::MatrixXd::Ones(n, 1);
  m.reward = Eigen::MatrixXd::Zero(n, m.num_actions());
  return m;
}

Pomdp example_one() {
  std::map<std::pair<std::string, std::string>, std::string> edges = {
      {{"sI", "a1"}, "s2"}, {{"sI", "a2"}, "s3"}, {{"s2", "a1"}, "s5"},
      {{"s2", "a2"}, "s4"}, {{"s3", "a1"}, "s5"}, {{"s3", "a2"}, "s6"},
  };
  for (const char* s : {"s4", "s5", "s6"}) {
    edges[{s, "a1"}] = s;
    edges[{s, "a2"}] = s;
  }
  auto m = make_deterministic({"sI", "s2", "s3", "s4", "s5", "s6"}, "sI", {"a1", "a2"}, edges);
  m.reward(m.state_index("s2"), m.action_index("a1")) = 1.0;
  m.reward(m.state_index("s3"), m.action_index("a1")) = 1.0;
  return m;
}

// 5 columns x 3 rows (top, middle, bottom); column 5 is absorbing.
Pomdp example_two() {
  const std::vector<std::vector<std::string>> columns = {
      {"s1", "sI", "s3"}, {"s4", "s5", "s6"}, {"s7", "s8", "s9"}, {"s10", "s11", "s12"}, {"s13", "s14", "s15"}};
  std::vector<std::string> states;
  for (const auto& col : columns) states.insert(states.end(), col.begin(), col.end());

  std::map<std::pair<std::string, std::string>, std::string> edges;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t r = 0; r < 3; ++r) {
      const auto& s = columns[c][r];
      if (c + 1 == columns.size()) {
        for (const char* a : {"a1", "a2", "a3"}) edges[{s, a}] = s;
        continue;
      }
      const auto& next = columns[c + 1];
      if (r == 1) {
        edges[{s, "a1"}] = next[0];
        edges[{s, "a2"}] = next[1];
        edges[{s, "a3"}] = next[2];
      } else if (r == 0) {
        edges[{s, "a1"}] = next[0];
        edges[{s, "a2"}] = next[1];
        edges[{s, "a3"}] = columns[c][1];
      } else {
        edges[{s, "a1"}] = next[2];
        edges[{s, "a2"}] = next[1];
        edges[{s, "a3"}] = columns[c][1];
      }
    }
  }
  auto m = make_deterministic(states, "sI", {"a1", "a2", "a3"}, edges);
  for (const char* s : {"s10", "s11", "s12"}) m.reward(m.state_index(s), m.action_index("a2")) = 1.0;
  return m;
}

}  // namespace

Pomdp builtin_example(std::string_view name) {
  if (name == "ex1") return example_one();
  if (name == "ex2") return example_two();
  throw Error("unknown_example", "unknown builtin example '" + std::string(name) + "'");
}

Pomdp load_model_or_builtin(const std::string& source) {
  constexpr std::string_view prefix = "builtin:";
  if (source.rfind(prefix, 0) == 0) return builtin_example(std::string_view(source).substr(prefix.size()));
  return load_model(source);
}

}  // namespace maxent
