#include "maxent/mc_analysis.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>

namespace maxent {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::vector<Index>> successors(const Mc& c) {
  std::vector<std::vector<Index>> succ(static_cast<std::size_t>(c.size()));
  for (Index i = 0; i < c.size(); ++i) {
    for (Index j = 0; j < c.size(); ++j) {
      if (c.transition(i, j) > 0.0) succ[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  return succ;
}

std::vector<bool> reachable_from(const std::vector<std::vector<Index>>& succ, Index start) {
  std::vector<bool> seen(succ.size(), false);
  std::queue<Index> frontier;
  seen[static_cast<std::size_t>(start)] = true;
  frontier.push(start);
  while (!frontier.empty()) {
    const auto s = frontier.front();
    frontier.pop();
    for (auto t : succ[static_cast<std::size_t>(s)]) {
      if (!seen[static_cast<std::size_t>(t)]) {
        seen[static_cast<std::size_t>(t)] = true;
        frontier.push(t);
      }
    }
  }
  return seen;
}

/// Tarjan SCC; returns the component id per state and a bottom flag per
/// component.
std::pair<std::vector<Index>, std::vector<bool>> bottom_components(const std::vector<std::vector<Index>>& succ) {
  const auto n = static_cast<Index>(succ.size());
  std::vector<Index> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0),
      comp(static_cast<std::size_t>(n), -1);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<Index> stack;
  Index counter = 0, components = 0;

  std::function<void(Index)> visit = [&](Index v) {
    const auto uv = static_cast<std::size_t>(v);
    index[uv] = low[uv] = counter++;
    stack.push_back(v);
    on_stack[uv] = true;
    for (auto w : succ[uv]) {
      const auto uw = static_cast<std::size_t>(w);
      if (index[uw] < 0) {
        visit(w);
        low[uv] = std::min(low[uv], low[uw]);
      } else if (on_stack[uw]) {
        low[uv] = std::min(low[uv], index[uw]);
      }
    }
    if (low[uv] == index[uv]) {
      Index w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[static_cast<std::size_t>(w)] = false;
        comp[static_cast<std::size_t>(w)] = components;
      } while (w != v);
      ++components;
    }
  };
  for (Index v = 0; v < n; ++v) {
    if (index[static_cast<std::size_t>(v)] < 0) visit(v);
  }

  std::vector<bool> bottom(static_cast<std::size_t>(components), true);
  for (Index v = 0; v < n; ++v) {
    for (auto w : succ[static_cast<std::size_t>(v)]) {
      if (comp[static_cast<std::size_t>(w)] != comp[static_cast<std::size_t>(v)]) {
        bottom[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])] = false;
      }
    }
  }
  return {comp, bottom};
}

struct Accumulated {
  Eigen::VectorXd values;
  bool finite = true;
  double residual = 0.0;
};

/// Solves v = local + P v on states that still accumulate, with v = 0 on
/// absorbing states and on bottom components whose local terms all vanish.
Accumulated accumulate(const Mc& c, const Eigen::VectorXd& local) {
  const Index n = c.size();
  const auto succ = successors(c);
  const auto [comp, bottom] = bottom_components(succ);

  enum class Kind { zero, infinite, solve };
  std::vector<Kind> kind(static_cast<std::size_t>(n), Kind::solve);
  std::vector<bool> bad_component(bottom.size(), false);
  for (Index i = 0; i < n; ++i) {
    const auto ci = static_cast<std::size_t>(comp[static_cast<std::size_t>(i)]);
    if (bottom[ci] && !c.absorbing[static_cast<std::size_t>(i)] && local(i) > 0.0) bad_component[ci] = true;
  }
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto ci = static_cast<std::size_t>(comp[ui]);
    if (c.absorbing[ui] || (bottom[ci] && !bad_component[ci])) kind[ui] = Kind::zero;
    if (bottom[ci] && bad_component[ci] && !c.absorbing[ui]) kind[ui] = Kind::infinite;
  }
  // Anything that can reach an infinite state without passing an absorbing
  // state is infinite too.
  std::vector<std::vector<Index>> pred(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (c.absorbing[static_cast<std::size_t>(i)]) continue;
    for (auto j : succ[static_cast<std::size_t>(i)]) pred[static_cast<std::size_t>(j)].push_back(i);
  }
  std::queue<Index> frontier;
  for (Index i = 0; i < n; ++i) {
    if (kind[static_cast<std::size_t>(i)] == Kind::infinite) frontier.push(i);
  }
  while (!frontier.empty()) {
    const auto j = frontier.front();
    frontier.pop();
    for (auto i : pred[static_cast<std::size_t>(j)]) {
      if (kind[static_cast<std::size_t>(i)] == Kind::solve) {
        kind[static_cast<std::size_t>(i)] = Kind::infinite;
        frontier.push(i);
      }
    }
  }

  std::vector<Index> unknown;
  std::vector<Index> position(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    if (kind[static_cast<std::size_t>(i)] == Kind::solve) {
      position[static_cast<std::size_t>(i)] = static_cast<Index>(unknown.size());
      unknown.push_back(i);
    }
  }
  const auto m = static_cast<Index>(unknown.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd rhs(m);
  for (Index r = 0; r < m; ++r) {
    const Index i = unknown[static_cast<std::size_t>(r)];
    rhs(r) = local(i);
    for (auto j : succ[static_cast<std::size_t>(i)]) {
      const Index col = position[static_cast<std::size_t>(j)];
      if (col >= 0) system(r, col) -= c.transition(i, j);
    }
  }

  Accumulated out;
  out.values = Eigen::VectorXd::Zero(n);
  if (m > 0) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd v = lu.solve(rhs);
    v += lu.solve(rhs - system * v);  // one refinement step
    out.residual = (system * v - rhs).lpNorm<Eigen::Infinity>();
    for (Index r = 0; r < m; ++r) out.values(unknown[static_cast<std::size_t>(r)]) = v(r);
  }
  for (Index i = 0; i < n; ++i) {
    if (kind[static_cast<std::size_t>(i)] == Kind::infinite) out.values(i) = kInf;
  }
  out.finite = kind[static_cast<std::size_t>(c.initial)] != Kind::infinite;
  return out;
}

}  // namespace

StateClassification classify_states(const Mc& c) {
  const auto succ = successors(c);
  const auto reach = reachable_from(succ, c.initial);
  const auto [comp, bottom] = bottom_components(succ);
  StateClassification out;
  for (Index i = 0; i < c.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!reach[ui]) {
      out.unreachable.push_back(i);
    } else if (bottom[static_cast<std::size_t>(comp[ui])]) {
      out.recurrent.push_back(i);
      if (!c.absorbing[ui]) out.recurrent_nonabsorbing.push_back(i);
    } else {
      out.transient.push_back(i);
    }
  }
  return out;
}

EvalResult entropy_fixed_point(const Mc& c) {
  EvalResult r;
  const auto acc = accumulate(c, c.local_entropy);
  r.nu = acc.values;
  r.entropy_bits = acc.values(c.initial);
  r.entropy_finite = acc.finite;
  r.entropy_residual = acc.residual;
  r.finite = acc.finite;
  if (!acc.finite) r.diagnostic = "positive-entropy recurrent states are reachable; entropy diverges";
  return r;
}

EvalResult expected_total_reward(const Mc& c) {
  EvalResult r;
  const auto acc = accumulate(c, c.reward);
  r.eta = acc.values;
  r.expected_reward = acc.values(c.initial);
  r.reward_finite = acc.finite;
  r.reward_residual = acc.residual;
  r.finite = acc.finite;
  if (!acc.finite) r.diagnostic = "positive-reward recurrent states are reachable; reward diverges";
  return r;
}

EvalResult evaluate(const Mc& c) {
  EvalResult r = entropy_fixed_point(c);
  const EvalResult reward = expected_total_reward(c);
  r.eta = reward.eta;
  r.expected_reward = reward.expected_reward;
  r.reward_finite = reward.reward_finite;
  r.reward_residual = reward.reward_residual;
  r.finite = r.entropy_finite && r.reward_finite;
  if (r.diagnostic.empty()) r.diagnostic = reward.diagnostic;
  return r;
}

}  // namespace maxent
