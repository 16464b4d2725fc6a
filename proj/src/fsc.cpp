#include "maxent/fsc.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace maxent {

namespace {

constexpr double kRowTol = 1e-9;
constexpr double kClampTol = 1e-12;

}  // namespace

bool is_well_defined(const Instantiation& u, double tol) {
  if (u.values.size() != u.layout.size()) return false;
  for (Index q = 0; q < u.layout.memory; ++q) {
    for (Index z = 0; z < u.layout.observations; ++z) {
      const auto row = u.row(q, z);
      if (!row.allFinite() || row.minCoeff() < -kClampTol) return false;
      if (std::abs(row.sum() - 1.0) > tol) return false;
    }
  }
  return true;
}

Eigen::MatrixXd chain_delta(Index k, Index num_observations, Index num_actions) {
  if (k < 1) throw Error("memory", "memory size must be at least 1");
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(k * num_observations * num_actions, k);
  for (Index q = 0; q < k; ++q) {
    const Index next = std::min(q + 1, k - 1);
    for (Index z = 0; z < num_observations; ++z) {
      for (Index a = 0; a < num_actions; ++a) delta((q * num_observations + z) * num_actions + a, next) = 1.0;
    }
  }
  return delta;
}

bool has_chain_delta(const Fsc& c) {
  const auto expected = chain_delta(c.k, static_cast<Index>(c.observations.size()),
                                    static_cast<Index>(c.actions.size()));
  return c.delta.rows() == expected.rows() && c.delta.cols() == expected.cols() && c.delta == expected &&
         c.initial_memory == 0;
}

Fsc lift(const Fsc& c, Index target_k) {
  if (!has_chain_delta(c)) throw Error("not_chain", "lift requires a chain-memory controller");
  if (target_k < c.k) throw Error("memory", "lift target is smaller than the controller");
  const auto layout = c.layout();
  Fsc out = c;
  out.k = target_k;
  out.gamma.resize(target_k * layout.observations, layout.actions);
  for (Index q = 0; q < target_k; ++q) {
    const Index source = std::min(q, c.k - 1);
    out.gamma.middleRows(q * layout.observations, layout.observations) =
        c.gamma.middleRows(source * layout.observations, layout.observations);
  }
  out.delta = chain_delta(target_k, layout.observations, layout.actions);
  return out;
}

Fsc fsc_from_instantiation(const Instantiation& u, const std::vector<std::string>& observations,
                           const std::vector<std::string>& actions) {
  const auto& layout = u.layout;
  if (layout.observations != static_cast<Index>(observations.size()) ||
      layout.actions != static_cast<Index>(actions.size())) {
    throw Error("mismatch", "instantiation layout does not match the alphabets");
  }
  if (u.values.size() != layout.size()) throw Error("mismatch", "instantiation has the wrong number of values");
  Fsc c;
  c.k = layout.memory;
  c.observations = observations;
  c.actions = actions;
  c.gamma.resize(layout.rows(), layout.actions);
  for (Index q = 0; q < layout.memory; ++q) {
    for (Index z = 0; z < layout.observations; ++z) {
      Eigen::RowVectorXd row = u.row(q, z).transpose();
      if (!row.allFinite() || row.minCoeff() < -kClampTol || std::abs(row.sum() - 1.0) > kRowTol) {
        throw Error("ill_defined", "instantiation row (q" + std::to_string(q + 1) + ", " + observations[z] +
                                       ") is not a distribution");
      }
      row = row.cwiseMax(0.0);
      row /= row.sum();
      c.gamma.row(layout.row(q, z)) = row;
    }
  }
  c.delta = chain_delta(c.k, layout.observations, layout.actions);
  return c;
}

Instantiation instantiation_of(const Fsc& c) {
  Instantiation u{c.layout(), Eigen::VectorXd(c.layout().size())};
  for (Index r = 0; r < c.gamma.rows(); ++r) u.values.segment(r * c.gamma.cols(), c.gamma.cols()) = c.gamma.row(r).transpose();
  return u;
}

Fsc uniform_fsc(Index k, const std::vector<std::string>& observations, const std::vector<std::string>& actions) {
  const ParamLayout layout{k, static_cast<Index>(observations.size()), static_cast<Index>(actions.size())};
  Fsc c;
  c.k = k;
  c.observations = observations;
  c.actions = actions;
  c.gamma = Eigen::MatrixXd::Constant(layout.rows(), layout.actions, 1.0 / static_cast<double>(layout.actions));
  c.delta = chain_delta(k, layout.observations, layout.actions);
  return c;
}

std::string fsc_to_json(const Fsc& c) {
  nlohmann::ordered_json doc;
  doc["k"] = c.k;
  doc["delta"] = "chain";
  nlohmann::ordered_json gamma = nlohmann::ordered_json::array();
  const auto layout = c.layout();
  for (Index q = 0; q < c.k; ++q) {
    for (Index z = 0; z < layout.observations; ++z) {
      nlohmann::ordered_json dist = nlohmann::ordered_json::object();
      for (Index a = 0; a < layout.actions; ++a) dist[c.actions[a]] = c.gamma(layout.row(q, z), a);
      gamma.push_back({{"q", q + 1}, {"z", c.observations[z]}, {"dist", dist}});
    }
  }
  doc["gamma"] = gamma;
  return doc.dump(2) + "\n";
}

Fsc align_to(const Fsc& c, const std::vector<std::string>& observations, const std::vector<std::string>& actions) {
  auto permutation = [](const std::vector<std::string>& from, const std::vector<std::string>& to, const char* kind) {
    if (from.size() != to.size()) throw Error("mismatch", std::string(kind) + " alphabet size differs");
    std::vector<Index> perm;
    for (const auto& id : to) {
      const auto it = std::find(from.begin(), from.end(), id);
      if (it == from.end()) throw Error("mismatch", std::string("controller has no ") + kind + " '" + id + "'");
      perm.push_back(it - from.begin());
    }
    return perm;
  };
  const auto z_perm = permutation(c.observations, observations, "observation");
  const auto a_perm = permutation(c.actions, actions, "action");
  Fsc out = c;
  out.observations = observations;
  out.actions = actions;
  const auto layout = out.layout();
  for (Index q = 0; q < c.k; ++q) {
    for (Index z = 0; z < layout.observations; ++z) {
      for (Index a = 0; a < layout.actions; ++a) {
        out.gamma(layout.row(q, z), a) = c.gamma(layout.row(q, z_perm[static_cast<std::size_t>(z)]),
                                                a_perm[static_cast<std::size_t>(a)]);
      }
    }
  }
  return out;
}

Fsc fsc_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("syntax", "controller syntax error at byte " + std::to_string(e.byte));
  }
  try {
    if (doc.at("delta").get<std::string>() != "chain") throw Error("schema", "only chain memory is supported");
    Fsc c;
    c.k = doc.at("k").get<Index>();
    if (c.k < 1) throw Error("memory", "controller memory must be at least 1");
    // Alphabets in first-seen order.
    for (const auto& entry : doc.at("gamma")) {
      const auto z = entry.at("z").get<std::string>();
      if (std::find(c.observations.begin(), c.observations.end(), z) == c.observations.end()) {
        c.observations.push_back(z);
      }
      for (const auto& [a, _] : entry.at("dist").items()) {
        if (std::find(c.actions.begin(), c.actions.end(), a) == c.actions.end()) c.actions.push_back(a);
      }
    }
    const auto layout = c.layout();
    c.gamma = Eigen::MatrixXd::Zero(layout.rows(), layout.actions);
    std::set<Index> seen;
    for (const auto& entry : doc.at("gamma")) {
      const Index q = entry.at("q").get<Index>() - 1;
      if (q < 0 || q >= c.k) throw Error("schema", "memory index out of range");
      const auto z_it = std::find(c.observations.begin(), c.observations.end(), entry.at("z").get<std::string>());
      const Index row = layout.row(q, z_it - c.observations.begin());
      if (!seen.insert(row).second) throw Error("duplicate", "duplicate gamma row");
      for (const auto& [a, p] : entry.at("dist").items()) {
        const auto a_it = std::find(c.actions.begin(), c.actions.end(), a);
        c.gamma(row, a_it - c.actions.begin()) = p.get<double>();
      }
    }
    if (static_cast<Index>(seen.size()) != layout.rows()) throw Error("missing_entry", "controller is missing gamma rows");
    for (Index r = 0; r < layout.rows(); ++r) {
      if (c.gamma.row(r).minCoeff() < 0.0 || std::abs(c.gamma.row(r).sum() - 1.0) > kRowTol) {
        throw Error("distribution_sum", "gamma row does not sum to 1");
      }
    }
    c.delta = chain_delta(c.k, layout.observations, layout.actions);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error("schema", std::string("malformed controller: ") + e.what());
  }
}

}  // namespace maxent
