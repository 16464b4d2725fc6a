#include "maxent/ccp.hpp"

#include "maxent/entropy.hpp"
#include "maxent/mc_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

namespace maxent {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kCertifyTol = 1e-6;

double convex_row_at(const ConvexConstraint& row, const Eigen::VectorXd& x) {
  double g = row.linear.evaluate(x);
  for (const auto& e : row.entropy) g += e.weight * xlogx(std::max(e.argument.evaluate(x), 0.0));
  for (const auto& s : row.squares) {
    const double y = s.argument.evaluate(x);
    g += s.weight * y * y;
  }
  return g;
}

/// Adds the convex surrogate of -x*y, expanded at (x_hat, y_hat), to `row`.
/// Written around the expansion point,
///   -x*y = -x_hat*y_hat - y_hat*dx - x_hat*dy - dx*dy,
/// the bilinear remainder is bounded by (dx/a - a*dy)^2 / 4. With a = 1 this
/// is the textbook split (x-y)^2/4 - (x+y)^2/4 with the concave half
/// linearized; keeping the square centered avoids cancellation.
void add_bilinear(ConvexConstraint& row, const AffineExpr& x, Index y, double x_hat, double y_hat, double a) {
  AffineExpr dx = x;
  dx.constant -= x_hat;
  AffineExpr dy = AffineExpr::variable(y);
  dy.constant -= y_hat;
  row.linear.constant += x_hat * y_hat;
  row.linear += (-y_hat) * x;
  row.linear.add_term(y, -x_hat);
  row.squares.push_back({(1.0 / a) * dx - a * dy, 0.25});
}

std::string param_name(const ParamLayout& layout, Index id) {
  const Index a = id % layout.actions;
  const Index row = id / layout.actions;
  return "gamma_" + std::to_string(row / layout.observations + 1) + "_" + std::to_string(row % layout.observations + 1) +
         "_" + std::to_string(a + 1);
}

bool uses_nu(const SynthesisProblem& p) { return p.mode != SynthesisMode::feasibility; }

Eigen::VectorXd interior_gamma(const ParamLayout& layout, Eigen::VectorXd u) {
  if ((u.array() > 0.0).all()) return u;
  constexpr double kMix = 1e-10;
  for (Index r = 0; r < layout.rows(); ++r) {
    auto row = u.segment(r * layout.actions, layout.actions);
    row = (1.0 - kMix) * row.cwiseMax(0.0) + Eigen::VectorXd::Constant(layout.actions, kMix / layout.actions);
  }
  return u;
}

}  // namespace

const char* to_string(SynthesisMode mode) {
  switch (mode) {
    case SynthesisMode::maxent:
      return "maxent";
    case SynthesisMode::feasibility:
      return "feasibility";
    case SynthesisMode::mdp_bound:
      return "mdp_bound";
  }
  return "maxent";
}

SynthesisMode parse_mode(const std::string& text) {
  if (text == "maxent") return SynthesisMode::maxent;
  if (text == "feasibility") return SynthesisMode::feasibility;
  if (text == "mdp_bound") return SynthesisMode::mdp_bound;
  throw Error("schema", "unknown mode '" + text + "' (expected maxent, feasibility or mdp_bound)");
}

SynthesisProblem make_problem(const Pomdp& m, Index k, double gamma, SynthesisMode mode) {
  if (!(gamma >= 0.0)) throw Error("schema", "reward threshold must be nonnegative");
  SynthesisProblem p;
  p.gamma_threshold = gamma;
  p.mode = mode;
  p.pmc = mode == SynthesisMode::mdp_bound ? build_pmc(to_fully_observable(m), 1) : build_pmc(m, k);
  return p;
}

std::pair<double, double> effective_boxes(const SynthesisProblem& p, const CcpConfig& cfg) {
  const auto n = static_cast<double>(p.pmc.size());
  double max_reward = 0.0;
  for (Index s = 0; s < p.pmc.size(); ++s) {
    const auto& expr = p.pmc.reward_expr[static_cast<std::size_t>(s)];
    // Largest immediate reward over any well-defined instantiation.
    Eigen::VectorXd per_row = Eigen::VectorXd::Zero(p.pmc.layout.rows());
    for (const auto& [id, c] : expr.terms) {
      const Index row = id / p.pmc.layout.actions;
      per_row(row) = std::max(per_row(row), c);
    }
    max_reward = std::max(max_reward, expr.constant + per_row.sum());
  }
  const double nu_box = cfg.nu_box > 0.0 ? cfg.nu_box : (n > 1.0 ? n * std::log2(n) : 0.0);
  const double eta_box = cfg.eta_box > 0.0 ? cfg.eta_box : n * max_reward;
  return {nu_box, eta_box};
}

Convexified convexify(const SynthesisProblem& p, const Iterate& at, double tau, const CcpConfig& cfg) {
  const Pmc& pm = p.pmc;
  const Index n = pm.size();
  const auto& layout = pm.layout;
  const auto [nu_box, eta_box] = effective_boxes(p, cfg);
  const bool with_nu = uses_nu(p);

  Convexified out;
  auto& sp = out.sp;
  out.params = layout.size();
  for (Index i = 0; i < layout.size(); ++i) sp.add_variable(param_name(layout, i), 0.0, 1.0);
  out.nu.assign(static_cast<std::size_t>(n), -1);
  out.eta.assign(static_cast<std::size_t>(n), -1);
  for (Index s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    const bool fixed = pm.self_loop[us];
    if (with_nu) out.nu[us] = sp.add_variable("nu_" + pm.state_names[us], 0.0, fixed ? 0.0 : nu_box);
  }
  for (Index s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    out.eta[us] = sp.add_variable("eta_" + pm.state_names[us], 0.0, pm.self_loop[us] ? 0.0 : eta_box);
  }
  if (with_nu) sp.objective = AffineExpr::variable(out.nu[static_cast<std::size_t>(pm.initial)]);

  for (Index r = 0; r < layout.rows(); ++r) {
    LinearConstraint simplex;
    simplex.relation = Relation::equal;
    simplex.bound = 1.0;
    for (Index a = 0; a < layout.actions; ++a) simplex.expr.add_term(r * layout.actions + a, 1.0);
    sp.linear.push_back(std::move(simplex));
  }

  auto add_psi = [&](const std::string& name) {
    const Index psi = sp.add_variable(name, 0.0, std::numeric_limits<double>::infinity());
    sp.objective.add_term(psi, -tau);
    out.psi.push_back(psi);
    return psi;
  };

  if (with_nu) {
    for (Index s = 0; s < n; ++s) {
      const auto us = static_cast<std::size_t>(s);
      if (pm.self_loop[us]) continue;
      ConvexConstraint row;
      row.name = "nu_row_" + pm.state_names[us];
      const Index psi = add_psi("psi_nu_" + pm.state_names[us]);
      row.linear = AffineExpr::variable(out.nu[us]) - AffineExpr::variable(psi);
      for (const auto& entry : pm.trans[us]) {
        if (!pm.absorbing[us]) row.entropy.push_back({entry.expr, 1.0 / kLn2});
        const auto ut = static_cast<std::size_t>(entry.target);
        if (pm.self_loop[ut]) continue;
        add_bilinear(row, entry.expr, out.nu[ut], entry.expr.evaluate(at.u), at.nu(entry.target), cfg.nu_split);
      }
      sp.convex.push_back(std::move(row));
      out.nu_row_state.push_back(s);
    }
  }
  for (Index s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    ConvexConstraint row;
    row.name = "eta_row_" + pm.state_names[us];
    const Index psi = add_psi("psi_eta_" + pm.state_names[us]);
    row.linear = AffineExpr::variable(out.eta[us]) - AffineExpr::variable(psi);
    if (!pm.absorbing[us]) row.linear = row.linear - pm.reward_expr[us];
    for (const auto& entry : pm.trans[us]) {
      const auto ut = static_cast<std::size_t>(entry.target);
      if (pm.self_loop[ut]) continue;
      add_bilinear(row, entry.expr, out.eta[ut], entry.expr.evaluate(at.u), at.eta(entry.target), cfg.eta_split);
    }
    sp.convex.push_back(std::move(row));
    out.eta_row_state.push_back(s);
  }
  const Index eta_init = out.eta[static_cast<std::size_t>(pm.initial)];
  if (p.gamma_threshold > 0.0) {
    sp.linear.push_back({AffineExpr::variable(eta_init), Relation::greater_equal, p.gamma_threshold});
  }

  // Strictly feasible start: interior gamma, nu/eta inside their boxes,
  // slacks above the row values.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sp.num_variables());
  x.head(layout.size()) = interior_gamma(layout, at.u);
  auto place = [&](Index var, double value) {
    const auto& v = sp.variables[static_cast<std::size_t>(var)];
    if (v.lower == v.upper) {
      x(var) = v.lower;
      return;
    }
    const double margin = 1e-6 * std::max(1.0, v.upper - v.lower);
    x(var) = std::clamp(std::isfinite(value) ? value : v.upper, v.lower + margin, v.upper - margin);
  };
  for (Index s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    if (with_nu) place(out.nu[us], at.nu(s));
    place(out.eta[us], at.eta(s));
  }
  if (p.gamma_threshold > 0.0 && x(eta_init) <= p.gamma_threshold && eta_box > p.gamma_threshold) {
    x(eta_init) = p.gamma_threshold + std::min(1e-3 * std::max(1.0, p.gamma_threshold), 0.5 * (eta_box - p.gamma_threshold));
  }
  for (std::size_t r = 0; r < sp.convex.size(); ++r) {
    const Index psi = out.psi[r];
    x(psi) = 0.0;
    x(psi) = std::max(0.0, convex_row_at(sp.convex[r], x)) + 1.0;
  }
  sp.initial_point = x;
  return out;
}

Iterate initialize(const SynthesisProblem& p, std::uint64_t seed, int restart_index) {
  const auto& layout = p.pmc.layout;
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart_index)};
  std::mt19937_64 rng(seq);
  std::exponential_distribution<double> draw(1.0);

  Iterate it;
  it.u.resize(layout.size());
  for (Index r = 0; r < layout.rows(); ++r) {
    auto row = it.u.segment(r * layout.actions, layout.actions);
    for (Index a = 0; a < layout.actions; ++a) row(a) = draw(rng);
    const double total = row.sum();
    if (total > 0.0) {
      row /= total;
    } else {
      row.setConstant(1.0 / static_cast<double>(layout.actions));
    }
  }
  const auto eval = evaluate(instantiate(p.pmc, Instantiation{layout, it.u}));
  it.nu = eval.nu.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
  it.eta = eval.eta.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
  return it;
}

Eigen::VectorXd true_row_values(const SynthesisProblem& p, const Iterate& x) {
  const Pmc& pm = p.pmc;
  std::vector<double> values;
  if (uses_nu(p)) {
    for (Index s = 0; s < pm.size(); ++s) {
      const auto us = static_cast<std::size_t>(s);
      if (pm.self_loop[us]) continue;
      double g = x.nu(s);
      for (const auto& entry : pm.trans[us]) {
        const double prob = entry.expr.evaluate(x.u);
        if (!pm.absorbing[us]) g += xlog2x(std::max(prob, 0.0));
        if (!pm.self_loop[static_cast<std::size_t>(entry.target)]) g -= prob * x.nu(entry.target);
      }
      values.push_back(g);
    }
  }
  for (Index s = 0; s < pm.size(); ++s) {
    const auto us = static_cast<std::size_t>(s);
    double g = x.eta(s);
    if (!pm.absorbing[us]) g -= pm.reward_expr[us].evaluate(x.u);
    for (const auto& entry : pm.trans[us]) {
      if (!pm.self_loop[static_cast<std::size_t>(entry.target)]) g -= entry.expr.evaluate(x.u) * x.eta(entry.target);
    }
    values.push_back(g);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

RunResult run_ccp(const SynthesisProblem& p, const CcpConfig& cfg, int restart_index) {
  const Pmc& pm = p.pmc;
  const bool with_nu = uses_nu(p);
  RunResult run;
  run.restart_index = restart_index;

  Iterate it = initialize(p, cfg.seed, restart_index);
  if (!with_nu) it.nu.setZero();
  auto record = [&](const Iterate& x, double tau) {
    IterationRecord rec;
    rec.tau = tau;
    rec.nu_initial = with_nu ? x.nu(pm.initial) : 0.0;
    rec.eta_initial = x.eta(pm.initial);
    rec.true_violation = true_row_values(p, x).cwiseMax(0.0).sum();
    return rec;
  };
  run.trace.push_back(record(it, 0.0));

  double tau = cfg.tau0;
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const auto conv = convexify(p, it, tau, cfg);
    const auto sol = solve_subproblem(conv.sp, cfg.solver);
    if (sol.status == SolveStatus::failed) {
      run.message = "subproblem " + std::to_string(iter) + " failed: " + sol.message;
      break;
    }
    Iterate next;
    next.u = sol.values.head(conv.params);
    next.nu = Eigen::VectorXd::Zero(pm.size());
    next.eta = Eigen::VectorXd::Zero(pm.size());
    for (Index s = 0; s < pm.size(); ++s) {
      const auto us = static_cast<std::size_t>(s);
      if (with_nu) next.nu(s) = sol.values(conv.nu[us]);
      next.eta(s) = sol.values(conv.eta[us]);
    }
    double slack = 0.0;
    for (Index psi : conv.psi) slack += sol.values(psi);

    auto rec = record(next, tau);
    rec.slack = slack;
    rec.objective = sol.objective;
    rec.newton_steps = sol.newton_steps;
    rec.status = sol.status;
    run.trace.push_back(rec);
    it = std::move(next);
    run.iterations = iter;
    run.slack_final = slack;

    const double objective = with_nu ? rec.nu_initial : -slack;
    run.stable = std::abs(objective - previous) <= cfg.obj_tol;
    if (run.stable && slack <= cfg.slack_tol) break;
    previous = objective;
    if (cfg.schedule_tau) tau = std::min(tau * cfg.tau_mult, cfg.tau_max);
  }
  run.converged = run.iterations > 0 && run.slack_final <= cfg.slack_tol && run.message.empty();
  if (run.converged && !run.stable) run.message = "iteration limit reached before the objective settled";

  // Certification on the exact chain.
  run.u = Instantiation{pm.layout, it.u};
  const auto u_clean = fsc_from_instantiation(run.u, pm.observations, pm.actions);
  run.u = instantiation_of(u_clean);
  const auto eval = evaluate(instantiate(pm, run.u));
  run.entropy_bits = eval.entropy_bits;
  run.expected_reward = eval.expected_reward;
  run.entropy_finite = eval.entropy_finite;
  run.nu_initial = with_nu ? it.nu(pm.initial) : 0.0;
  if (!eval.finite) run.message = eval.diagnostic;
  return run;
}

int resolve_threads(int requested) {
  int threads = requested;
  if (threads <= 0) {
    if (const char* env = std::getenv("MAXENT_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(threads, 1);
}

SynthesisResult synthesize(const SynthesisProblem& p, const CcpConfig& cfg) {
  if (!(cfg.tau0 > 0.0) || !(cfg.tau_mult > 1.0) || cfg.restarts < 1) {
    throw Error("schema", "invalid configuration: need tau0 > 0, tau_mult > 1, restarts >= 1");
  }
  SynthesisResult result;
  result.runs.resize(static_cast<std::size_t>(cfg.restarts));
  const int workers = std::min(resolve_threads(cfg.threads), cfg.restarts);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < cfg.restarts; r = next++) result.runs[static_cast<std::size_t>(r)] = run_ccp(p, cfg, r);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  const double gamma = p.gamma_threshold;
  const RunResult* best = nullptr;
  for (const auto& run : result.runs) {
    if (!run.entropy_finite || !(run.expected_reward >= gamma - kCertifyTol)) continue;
    if (!best || run.entropy_bits > best->entropy_bits) best = &run;
  }
  const bool feasible = best != nullptr;
  if (!best) {
    // Best effort: the run closest to the reward threshold.
    for (const auto& run : result.runs) {
      if (!best || run.expected_reward > best->expected_reward) best = &run;
    }
  }
  result.best_u = best->u;
  result.entropy_bits = best->entropy_bits;
  result.expected_reward = best->expected_reward;
  result.nu_initial = best->nu_initial;
  result.entropy_finite = best->entropy_finite;
  result.iterations = best->iterations;
  result.restart_index = best->restart_index;
  result.slack_final = best->slack_final;
  const bool any_converged =
      std::any_of(result.runs.begin(), result.runs.end(), [](const RunResult& r) { return r.converged; });
  result.converged = feasible && any_converged;
  if (!feasible) {
    result.message = "no restart met the reward threshold";
  } else if (!any_converged) {
    result.message = "no restart drove the slack below the tolerance";
  } else if (!best->entropy_finite) {
    result.message = "entropy is infinite under the returned controller";
  }
  return result;
}

}  // namespace maxent
