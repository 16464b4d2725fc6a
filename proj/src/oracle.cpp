#include "maxent/oracle.hpp"

#include "maxent/entropy.hpp"
#include "maxent/mc_analysis.hpp"

#include <cmath>
#include <functional>
#include <map>

namespace maxent {

namespace {

constexpr double kLeakTol = 1e-9;

void check_horizon(int horizon) {
  if (horizon < 1 || horizon > kMaxHorizon) {
    throw Error("horizon", "horizon must be in [1, " + std::to_string(kMaxHorizon) + "], got " + std::to_string(horizon));
  }
}

/// Calls visit(path, probability) for every positive-probability state
/// sequence of length `horizon` starting at the initial state.
void for_each_path(const Mc& c, int horizon, const std::function<void(const std::vector<Index>&, double)>& visit) {
  check_horizon(horizon);
  std::vector<Index> path{c.initial};
  double total = 0.0;
  std::function<void(double)> extend = [&](double prob) {
    if (static_cast<int>(path.size()) == horizon) {
      total += prob;
      visit(path, prob);
      return;
    }
    const Index s = path.back();
    for (Index t = 0; t < c.size(); ++t) {
      const double p = c.transition(s, t);
      if (p <= 0.0) continue;
      path.push_back(t);
      extend(prob * p);
      path.pop_back();
    }
  };
  extend(1.0);
  if (std::abs(total - 1.0) > kLeakTol) {
    throw Error("leak", "path probabilities sum to " + std::to_string(total));
  }
}

double sequence_entropy(const std::map<std::vector<Index>, double>& dist) {
  double h = 0.0;
  for (const auto& [seq, p] : dist) h -= xlog2x(p);
  return h;
}

}  // namespace

HorizonEntropy finite_horizon_entropy(const Mc& c, int horizon) {
  HorizonEntropy out;
  out.horizon = horizon;
  for_each_path(c, horizon, [&](const std::vector<Index>& path, double p) {
    out.entropy_bits -= xlog2x(p);
    ++out.path_count;
    if (c.absorbing[static_cast<std::size_t>(path.back())]) out.absorbed_mass += p;
  });
  return out;
}

double projected_horizon_entropy(const Mc& c, int horizon, const std::vector<Index>& projection) {
  if (static_cast<Index>(projection.size()) != c.size()) throw Error("mismatch", "projection size differs from the chain");
  std::map<std::vector<Index>, double> dist;
  for_each_path(c, horizon, [&](const std::vector<Index>& path, double p) {
    std::vector<Index> image(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) image[i] = projection[static_cast<std::size_t>(path[i])];
    dist[image] += p;
  });
  return sequence_entropy(dist);
}

double chain_rule_check(const Mc& c, int n, int k) {
  check_horizon(n);
  if (k < 1 || k > n) throw Error("horizon", "chain rule split k must satisfy 1 <= k <= n");
  const double joint = finite_horizon_entropy(c, n).entropy_bits;
  const double prefix_entropy = k >= 2 ? finite_horizon_entropy(c, k - 1).entropy_bits : 0.0;

  // Group full paths by their first k-1 states.
  const auto prefix_len = static_cast<std::size_t>(k - 1);
  std::map<std::vector<Index>, std::vector<double>> by_prefix;
  for_each_path(c, n, [&](const std::vector<Index>& path, double p) {
    by_prefix[std::vector<Index>(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(prefix_len))].push_back(p);
  });
  double conditional = 0.0;
  for (const auto& [prefix, probs] : by_prefix) {
    double mass = 0.0;
    for (double p : probs) mass += p;
    for (double p : probs) conditional -= p * std::log2(p / mass);
  }
  return std::abs(joint - conditional - prefix_entropy);
}

double value_recursion(const Mc& c, int horizon) {
  check_horizon(horizon + 1);
  std::vector<Index> history{c.initial};
  std::function<double(int)> value = [&](int t) -> double {
    if (t > horizon) return 0.0;
    const Index s = history.back();
    const double local = entropy_bits(c.transition.row(s));
    double future = 0.0;
    for (Index next = 0; next < c.size(); ++next) {
      const double p = c.transition(s, next);
      if (p <= 0.0) continue;
      history.push_back(next);
      future += p * value(t + 1);
      history.pop_back();
    }
    return local + future;
  };
  return value(1);
}

double finite_horizon_reward(const Mc& c, int horizon) {
  double total = 0.0;
  for_each_path(c, horizon, [&](const std::vector<Index>& path, double p) {
    double collected = 0.0;
    for (Index s : path) {
      if (!c.absorbing[static_cast<std::size_t>(s)]) collected += c.reward(s);
    }
    total += p * collected;
  });
  return total;
}

double ex1_closed_form(double gamma) {
  if (!(gamma >= 0.5 && gamma <= 1.0)) throw Error("range", "closed form holds for gamma in [0.5, 1]");
  return 1.0 + binary_entropy(gamma);
}

GridSearchResult policy_grid_search(const Pomdp& m, Index k, double gamma, double resolution) {
  if (!(resolution > 0.0 && resolution <= 1.0)) throw Error("range", "resolution must be in (0, 1]");
  const Pmc p = build_pmc(m, k);
  const auto& layout = p.layout;
  const Index na = layout.actions;

  std::vector<bool> used(static_cast<std::size_t>(layout.rows()), false);
  for (Index s = 0; s < p.size(); ++s) {
    if (p.absorbing[static_cast<std::size_t>(s)]) continue;
    for (const auto& entry : p.trans[static_cast<std::size_t>(s)]) {
      for (const auto& [id, c] : entry.expr.terms) used[static_cast<std::size_t>(id / na)] = true;
    }
  }
  std::vector<Index> rows;
  for (Index r = 0; r < layout.rows(); ++r) {
    if (used[static_cast<std::size_t>(r)]) rows.push_back(r);
  }
  GridSearchResult out;
  out.free_parameters = static_cast<int>(rows.size() * static_cast<std::size_t>(na - 1));
  if (out.free_parameters > 6) {
    throw Error("too_many_parameters", "grid search supports at most 6 free parameters, model has " +
                                           std::to_string(out.free_parameters));
  }

  // All points of the simplex grid with step 1/steps.
  const auto steps = static_cast<int>(std::lround(1.0 / resolution));
  std::vector<Eigen::VectorXd> simplex;
  std::vector<int> counts(static_cast<std::size_t>(na), 0);
  std::function<void(Index, int)> compose = [&](Index a, int left) {
    if (a == na - 1) {
      counts[static_cast<std::size_t>(a)] = left;
      Eigen::VectorXd point(na);
      for (Index i = 0; i < na; ++i) point(i) = counts[static_cast<std::size_t>(i)] / static_cast<double>(steps);
      simplex.push_back(point);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[static_cast<std::size_t>(a)] = c;
      compose(a + 1, left - c);
    }
  };
  compose(0, steps);

  Instantiation u{layout, Eigen::VectorXd::Constant(layout.size(), 1.0 / static_cast<double>(na))};
  auto consider = [&](const Instantiation& candidate) {
    ++out.evaluations;
    const auto eval = evaluate(instantiate(p, candidate));
    if (!eval.finite || !(eval.expected_reward >= gamma - 1e-9)) return false;
    if (out.feasible && !(eval.entropy_bits > out.entropy_bits)) return false;
    out.feasible = true;
    out.entropy_bits = eval.entropy_bits;
    out.expected_reward = eval.expected_reward;
    out.u = candidate;
    return true;
  };

  std::vector<std::size_t> odometer(rows.size(), 0);
  while (true) {
    for (std::size_t i = 0; i < rows.size(); ++i) u.values.segment(rows[i] * na, na) = simplex[odometer[i]];
    consider(u);
    std::size_t i = 0;
    while (i < odometer.size() && ++odometer[i] == simplex.size()) odometer[i++] = 0;
    if (i == odometer.size()) break;
  }
  if (!out.feasible) return out;

  // Coordinate refinement: move mass between pairs of actions in each row.
  double step = resolution;
  for (int round = 0; round < 20; ++round) {
    bool improved = false;
    for (Index r : rows) {
      for (Index a = 0; a < na; ++a) {
        for (Index b = 0; b < na; ++b) {
          if (a == b) continue;
          Instantiation candidate = out.u;
          const Index ia = r * na + a;
          const Index ib = r * na + b;
          const double moved = std::min(step, candidate.values(ib));
          if (moved <= 0.0) continue;
          candidate.values(ia) += moved;
          candidate.values(ib) -= moved;
          improved = consider(candidate) || improved;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return out;
}

}  // namespace maxent
