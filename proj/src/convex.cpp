#include "maxent/convex.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace maxent {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this argument the phase-I search uses a quadratic extension of x ln x.
constexpr double kExtensionPoint = 1e-6;
// Equality residual treated as a breakdown of the Newton system.
constexpr double kEqualityDrift = 1e-10;
constexpr int kMaxCenteringSteps = 100;

struct SparseLin {
  std::vector<int> idx;
  std::vector<double> coef;
  double constant = 0.0;

  double eval(const Eigen::VectorXd& x) const {
    double v = constant;
    for (std::size_t k = 0; k < idx.size(); ++k) v += coef[k] * x(idx[k]);
    return v;
  }
  bool empty() const { return idx.empty(); }
};

struct WeightedLin {
  SparseLin lin;
  double weight = 1.0;
  std::vector<int> pos;  // positions inside the row support
};

enum class Origin { linear, convex, domain, bound };

/// g(x) <= 0 with g = lin + sum w * ent(arg) + sum w * arg^2
struct Row {
  SparseLin lin;
  std::vector<WeightedLin> ent;
  std::vector<WeightedLin> sq;
  std::vector<int> support;
  std::vector<int> lin_pos;
  Origin origin = Origin::linear;
  int origin_index = -1;

  bool is_linear() const { return ent.empty() && sq.empty(); }
};

struct Compiled {
  int n = 0;
  std::vector<int> free_of_full;
  std::vector<int> full_of_free;
  Eigen::VectorXd fixed;  // full-size, fixed values (NaN for free)
  Eigen::VectorXd c;      // minimize c^T x
  Eigen::VectorXd lo, hi;
  std::vector<Row> rows;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<int> eq_origin;
  bool extended_entropy = false;
};

double ent_value(double y, bool extended) {
  if (extended && y < kExtensionPoint) {
    const double e = kExtensionPoint;
    const double d = y - e;
    return e * std::log(e) + (std::log(e) + 1.0) * d + d * d / (2.0 * e);
  }
  if (y > 0.0) return y * std::log(y);
  if (y == 0.0) return 0.0;
  return std::numeric_limits<double>::quiet_NaN();
}
double ent_slope(double y, bool extended) {
  if (extended && y < kExtensionPoint) return std::log(kExtensionPoint) + 1.0 + (y - kExtensionPoint) / kExtensionPoint;
  return std::log(y) + 1.0;
}
double ent_curvature(double y, bool extended) {
  if (extended && y < kExtensionPoint) return 1.0 / kExtensionPoint;
  return 1.0 / y;
}

double row_value(const Row& r, const Eigen::VectorXd& x, bool extended) {
  double g = r.lin.eval(x);
  for (const auto& e : r.ent) g += e.weight * ent_value(e.lin.eval(x), extended);
  for (const auto& s : r.sq) {
    const double y = s.lin.eval(x);
    g += s.weight * y * y;
  }
  return g;
}

/// grad g(x) . d
double row_slope(const Row& r, const Eigen::VectorXd& x, const Eigen::VectorXd& d, bool extended) {
  auto dot = [&](const SparseLin& lin) {
    double v = 0.0;
    for (std::size_t k = 0; k < lin.idx.size(); ++k) v += lin.coef[k] * d(lin.idx[k]);
    return v;
  };
  double v = dot(r.lin);
  for (const auto& e : r.ent) v += e.weight * ent_slope(e.lin.eval(x), extended) * dot(e.lin);
  for (const auto& s : r.sq) v += 2.0 * s.weight * s.lin.eval(x) * dot(s.lin);
  return v;
}

void finalize_support(Row& r) {
  std::vector<int> all = r.lin.idx;
  for (const auto& e : r.ent) all.insert(all.end(), e.lin.idx.begin(), e.lin.idx.end());
  for (const auto& s : r.sq) all.insert(all.end(), s.lin.idx.begin(), s.lin.idx.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  r.support = all;
  auto positions = [&](const SparseLin& lin) {
    std::vector<int> pos;
    for (int id : lin.idx) pos.push_back(static_cast<int>(std::lower_bound(all.begin(), all.end(), id) - all.begin()));
    return pos;
  };
  r.lin_pos = positions(r.lin);
  for (auto& e : r.ent) e.pos = positions(e.lin);
  for (auto& s : r.sq) s.pos = positions(s.lin);
}

SparseLin to_free(const AffineExpr& e, const Compiled& cp) {
  SparseLin out;
  out.constant = e.constant;
  for (const auto& [id, coef] : e.terms) {
    if (coef == 0.0) continue;
    const int f = cp.free_of_full[static_cast<std::size_t>(id)];
    if (f < 0) {
      out.constant += coef * cp.fixed(id);
    } else {
      out.idx.push_back(f);
      out.coef.push_back(coef);
    }
  }
  return out;
}

/// x >= 0 is implied when every coefficient is nonnegative on variables
/// whose lower bound is nonnegative and the constant is nonnegative.
bool nonnegativity_implied(const SparseLin& lin, const Compiled& cp) {
  if (lin.constant < 0.0) return false;
  for (std::size_t k = 0; k < lin.idx.size(); ++k) {
    if (lin.coef[k] < 0.0 || !(cp.lo(lin.idx[k]) >= 0.0)) return false;
  }
  return true;
}

Compiled compile(const ConvexSubproblem& sp, std::string& error) {
  Compiled cp;
  const auto nfull = sp.num_variables();
  cp.free_of_full.assign(static_cast<std::size_t>(nfull), -1);
  cp.fixed = Eigen::VectorXd::Constant(nfull, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> lo, hi;
  for (Index j = 0; j < nfull; ++j) {
    const auto& v = sp.variables[static_cast<std::size_t>(j)];
    if (v.lower > v.upper) {
      error = "variable '" + v.name + "' has empty bounds";
      return cp;
    }
    if (v.lower == v.upper) {
      cp.fixed(j) = v.lower;
    } else {
      cp.free_of_full[static_cast<std::size_t>(j)] = cp.n++;
      cp.full_of_free.push_back(static_cast<int>(j));
      lo.push_back(v.lower);
      hi.push_back(v.upper);
    }
  }
  cp.lo = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Index>(lo.size()));
  cp.hi = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Index>(hi.size()));

  cp.c = Eigen::VectorXd::Zero(cp.n);
  const auto objective = to_free(sp.objective, cp);
  for (std::size_t k = 0; k < objective.idx.size(); ++k) cp.c(objective.idx[k]) -= objective.coef[k];

  std::vector<SparseLin> eq_rows;
  std::vector<double> eq_rhs;
  for (std::size_t i = 0; i < sp.linear.size(); ++i) {
    const auto& lc = sp.linear[i];
    auto lin = to_free(lc.expr, cp);
    if (lc.relation == Relation::equal) {
      if (lin.empty()) {
        if (std::abs(lin.constant - lc.bound) > 1e-12) error = "inconsistent constant equality row";
        continue;
      }
      eq_rhs.push_back(lc.bound - lin.constant);
      lin.constant = 0.0;
      eq_rows.push_back(std::move(lin));
      cp.eq_origin.push_back(static_cast<int>(i));
      continue;
    }
    Row r;
    r.origin = Origin::linear;
    r.origin_index = static_cast<int>(i);
    lin.constant -= lc.bound;
    if (lc.relation == Relation::greater_equal) {
      lin.constant = -lin.constant;
      for (auto& v : lin.coef) v = -v;
    }
    r.lin = std::move(lin);
    finalize_support(r);
    cp.rows.push_back(std::move(r));
  }

  std::vector<SparseLin> domain;
  for (std::size_t i = 0; i < sp.convex.size(); ++i) {
    const auto& cc = sp.convex[i];
    Row r;
    r.origin = Origin::convex;
    r.origin_index = static_cast<int>(i);
    r.lin = to_free(cc.linear, cp);
    for (const auto& e : cc.entropy) {
      auto arg = to_free(e.argument, cp);
      if (e.weight < 0.0) error = "negative entropy weight in row '" + cc.name + "'";
      if (arg.empty()) {
        if (arg.constant < 0.0) error = "negative constant entropy argument in row '" + cc.name + "'";
        r.lin.constant += e.weight * ent_value(std::max(arg.constant, 0.0), false);
        continue;
      }
      if (!nonnegativity_implied(arg, cp)) domain.push_back(arg);
      r.ent.push_back({std::move(arg), e.weight, {}});
    }
    for (const auto& s : cc.squares) {
      auto arg = to_free(s.argument, cp);
      if (s.weight < 0.0) error = "negative square weight in row '" + cc.name + "'";
      if (arg.empty()) {
        r.lin.constant += s.weight * arg.constant * arg.constant;
        continue;
      }
      r.sq.push_back({std::move(arg), s.weight, {}});
    }
    finalize_support(r);
    cp.rows.push_back(std::move(r));
  }
  for (auto& arg : domain) {
    Row r;
    r.origin = Origin::domain;
    r.lin = arg;
    r.lin.constant = -r.lin.constant;
    for (auto& v : r.lin.coef) v = -v;
    finalize_support(r);
    cp.rows.push_back(std::move(r));
  }

  cp.A = Eigen::MatrixXd::Zero(static_cast<Index>(eq_rows.size()), cp.n);
  cp.b = Eigen::VectorXd(static_cast<Index>(eq_rows.size()));
  for (std::size_t i = 0; i < eq_rows.size(); ++i) {
    for (std::size_t k = 0; k < eq_rows[i].idx.size(); ++k) {
      cp.A(static_cast<Index>(i), eq_rows[i].idx[k]) += eq_rows[i].coef[k];
    }
    cp.b(static_cast<Index>(i)) = eq_rhs[i];
  }
  return cp;
}

/// Phase-I problem: minimize s subject to g_i(x) <= s for every row and
/// bound, s >= -1.
Compiled phase_one(const Compiled& cp) {
  Compiled p1;
  p1.n = cp.n + 1;
  const int s = cp.n;
  p1.c = Eigen::VectorXd::Zero(p1.n);
  p1.c(s) = 1.0;
  p1.lo = Eigen::VectorXd::Constant(p1.n, -kInf);
  p1.hi = Eigen::VectorXd::Constant(p1.n, kInf);
  p1.lo(s) = -1.0;
  p1.A = Eigen::MatrixXd::Zero(cp.A.rows(), p1.n);
  p1.A.leftCols(cp.n) = cp.A;
  p1.b = cp.b;
  p1.extended_entropy = true;
  auto shifted = [s](Row r) {
    r.lin.idx.push_back(s);
    r.lin.coef.push_back(-1.0);
    finalize_support(r);
    return r;
  };
  for (const auto& r : cp.rows) p1.rows.push_back(shifted(r));
  for (int j = 0; j < cp.n; ++j) {
    if (std::isfinite(cp.lo(j))) {
      Row r;
      r.origin = Origin::bound;
      r.lin.idx = {j};
      r.lin.coef = {-1.0};
      r.lin.constant = cp.lo(j);
      p1.rows.push_back(shifted(r));
    }
    if (std::isfinite(cp.hi(j))) {
      Row r;
      r.origin = Origin::bound;
      r.lin.idx = {j};
      r.lin.coef = {1.0};
      r.lin.constant = -cp.hi(j);
      p1.rows.push_back(shifted(r));
    }
  }
  return p1;
}

bool strictly_feasible(const Compiled& cp, const Eigen::VectorXd& x) {
  for (int j = 0; j < cp.n; ++j) {
    if (!(x(j) > cp.lo(j)) || !(x(j) < cp.hi(j))) return false;
  }
  // Domain rows first so entropy arguments are positive when evaluated.
  for (const auto& r : cp.rows) {
    if (r.is_linear() && !(r.lin.eval(x) < 0.0)) return false;
  }
  for (const auto& r : cp.rows) {
    if (!r.is_linear() && !(row_value(r, x, cp.extended_entropy) < 0.0)) return false;
  }
  return true;
}

struct BarrierState {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_dual;
  Eigen::VectorXd last_step;  // Newton step from the final Newton system
  double t = 1.0;
  int newton_steps = 0;
  bool converged = false;
  bool stalled = false;
  double gap = kInf;
};

class BarrierSolver {
 public:
  BarrierSolver(const Compiled& cp, const SolverOptions& options) : cp_(cp), opt_(options) {
    m_ = static_cast<double>(cp.rows.size());
    for (int j = 0; j < cp.n; ++j) {
      if (std::isfinite(cp.lo(j))) m_ += 1.0;
      if (std::isfinite(cp.hi(j))) m_ += 1.0;
    }
  }

  /// Runs the barrier method from a strictly feasible x. `early_stop` is
  /// checked after every Newton step.
  template <typename Stop>
  BarrierState run(Eigen::VectorXd x, Stop&& early_stop) {
    BarrierState st;
    st.x = std::move(x);
    st.t = opt_.t0;
    st.eq_dual = Eigen::VectorXd::Zero(cp_.A.rows());
    if (m_ == 0.0) {
      st.converged = true;
      st.gap = 0.0;
      return st;
    }
    std::optional<BarrierState> last_centered;
    while (true) {
      const bool centered = center(st, early_stop);
      if (early_stop(st.x)) {
        st.converged = true;
        return st;
      }
      if (!centered) {
        // Numerical trouble at this t: fall back to the last centered point.
        if (last_centered) {
          const int steps = st.newton_steps;
          st = *last_centered;
          st.newton_steps = steps;
        }
        st.stalled = true;
        st.gap = m_ / st.t;
        return st;
      }
      st.gap = m_ / st.t;
      if (st.gap <= opt_.gap_tol) {
        st.converged = true;
        return st;
      }
      if (st.newton_steps >= opt_.max_newton_steps) return st;
      last_centered = st;
      st.t *= opt_.mu;
    }
  }

 private:
  /// Gradient and Hessian (lower triangle) of t c^T x - sum log(-g).
  void assemble(const Eigen::VectorXd& x, double t, Eigen::VectorXd& grad) {
    const int n = cp_.n;
    grad = t * cp_.c;
    triplets_.clear();
    for (int j = 0; j < n; ++j) {
      double h = 0.0;
      if (std::isfinite(cp_.lo(j))) {
        const double d = x(j) - cp_.lo(j);
        grad(j) -= 1.0 / d;
        h += 1.0 / (d * d);
      }
      if (std::isfinite(cp_.hi(j))) {
        const double d = cp_.hi(j) - x(j);
        grad(j) += 1.0 / d;
        h += 1.0 / (d * d);
      }
      triplets_.emplace_back(j, j, h);
    }
    for (const auto& r : cp_.rows) {
      const auto ns = static_cast<Index>(r.support.size());
      local_grad_.setZero(ns);
      local_hess_.setZero(ns, ns);
      double g = r.lin.eval(x);
      for (std::size_t k = 0; k < r.lin.idx.size(); ++k) local_grad_(r.lin_pos[k]) += r.lin.coef[k];
      for (const auto& e : r.ent) {
        const double y = e.lin.eval(x);
        g += e.weight * ent_value(y, cp_.extended_entropy);
        const double slope = e.weight * ent_slope(y, cp_.extended_entropy);
        const double curv = e.weight * ent_curvature(y, cp_.extended_entropy);
        for (std::size_t a = 0; a < e.pos.size(); ++a) {
          local_grad_(e.pos[a]) += slope * e.lin.coef[a];
          for (std::size_t b = 0; b < e.pos.size(); ++b) {
            local_hess_(e.pos[a], e.pos[b]) += curv * e.lin.coef[a] * e.lin.coef[b];
          }
        }
      }
      for (const auto& s : r.sq) {
        const double y = s.lin.eval(x);
        g += s.weight * y * y;
        for (std::size_t a = 0; a < s.pos.size(); ++a) {
          local_grad_(s.pos[a]) += 2.0 * s.weight * y * s.lin.coef[a];
          for (std::size_t b = 0; b < s.pos.size(); ++b) {
            local_hess_(s.pos[a], s.pos[b]) += 2.0 * s.weight * s.lin.coef[a] * s.lin.coef[b];
          }
        }
      }
      const double inv = 1.0 / (-g);
      for (Index a = 0; a < ns; ++a) {
        grad(r.support[static_cast<std::size_t>(a)]) += inv * local_grad_(a);
        for (Index b = 0; b <= a; ++b) {
          const double v = inv * inv * local_grad_(a) * local_grad_(b) + inv * local_hess_(a, b);
          const int ia = r.support[static_cast<std::size_t>(a)];
          const int ib = r.support[static_cast<std::size_t>(b)];
          if (ia >= ib) {
            triplets_.emplace_back(ia, ib, v);
          } else {
            triplets_.emplace_back(ib, ia, v);
          }
        }
      }
    }
    hessian_.resize(n, n);
    hessian_.setFromTriplets(triplets_.begin(), triplets_.end());
  }

  /// Removes rounding drift from Ax = b with a step scaled by the squared
  /// distance to the bounds, so variables near a bound barely move. Kept
  /// only when the result stays strictly feasible.
  void restore_equalities(Eigen::VectorXd& x) const {
    if (cp_.A.rows() == 0) return;
    const Eigen::VectorXd r = cp_.b - cp_.A * x;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-14) return;
    Eigen::VectorXd d(cp_.n);
    for (int j = 0; j < cp_.n; ++j) {
      const double room = std::min(x(j) - cp_.lo(j), cp_.hi(j) - x(j));
      d(j) = std::isfinite(room) ? room * room : 1.0;
    }
    const Eigen::MatrixXd ad = cp_.A * d.asDiagonal();
    const Eigen::MatrixXd m = ad * cp_.A.transpose();
    const Eigen::VectorXd y = m.completeOrthogonalDecomposition().solve(r);
    const Eigen::VectorXd candidate = x + ad.transpose() * y;
    if (strictly_feasible(cp_, candidate)) x = candidate;
  }

  /// [H A^T; A 0] [dx; w] = [r1; r2] via the Schur complement of H.
  void solve_kkt(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx, Eigen::VectorXd& w) {
    const Index p = cp_.A.rows();
    const Eigen::VectorXd u = ldlt_.solve(r1);
    if (p == 0) {
      dx = u;
      w.resize(0);
      return;
    }
    if (schur_stale_) {
      Y_ = ldlt_.solve(cp_.A.transpose());
      schur_.compute(cp_.A * Y_);
      schur_stale_ = false;
    }
    w = schur_.solve(cp_.A * u - r2);
    dx = u - Y_ * w;
  }

  bool factorize() {
    schur_stale_ = true;
    if (!analyzed_) {
      ldlt_.analyzePattern(hessian_);
      analyzed_ = true;
    }
    ldlt_.factorize(hessian_);
    double shift = 0.0;
    const double scale = 1.0 + hessian_.diagonal().cwiseAbs().maxCoeff();
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (ldlt_.info() == Eigen::Success && (ldlt_.vectorD().array() > 0.0).all()) return true;
      shift = shift == 0.0 ? 1e-14 * scale : shift * 100.0;
      Eigen::SparseMatrix<double> shifted = hessian_;
      for (int j = 0; j < cp_.n; ++j) shifted.coeffRef(j, j) += shift;
      ldlt_.factorize(shifted);
    }
    return ldlt_.info() == Eigen::Success;
  }

  double merit_change(const Eigen::VectorXd& x, const Eigen::VectorXd& x_new, const std::vector<double>& g_old,
                      double t, bool& feasible) {
    double change = t * cp_.c.dot(x_new - x);
    for (int j = 0; j < cp_.n; ++j) {
      if (std::isfinite(cp_.lo(j))) {
        const double d_new = x_new(j) - cp_.lo(j);
        if (!(d_new > 0.0)) {
          feasible = false;
          return kInf;
        }
        change -= std::log(d_new / (x(j) - cp_.lo(j)));
      }
      if (std::isfinite(cp_.hi(j))) {
        const double d_new = cp_.hi(j) - x_new(j);
        if (!(d_new > 0.0)) {
          feasible = false;
          return kInf;
        }
        change -= std::log(d_new / (cp_.hi(j) - x(j)));
      }
    }
    for (std::size_t i = 0; i < cp_.rows.size(); ++i) {
      if (!cp_.rows[i].is_linear()) continue;
      const double g = cp_.rows[i].lin.eval(x_new);
      if (!(g < 0.0)) {
        feasible = false;
        return kInf;
      }
      change -= std::log(g / g_old[i]);
    }
    for (std::size_t i = 0; i < cp_.rows.size(); ++i) {
      if (cp_.rows[i].is_linear()) continue;
      const double g = row_value(cp_.rows[i], x_new, cp_.extended_entropy);
      if (!(g < 0.0)) {
        feasible = false;
        return kInf;
      }
      change -= std::log(g / g_old[i]);
    }
    feasible = true;
    return change;
  }

  template <typename Stop>
  bool center(BarrierState& st, Stop&& early_stop) {
    Eigen::VectorXd grad;
    std::vector<double> g_old(cp_.rows.size());
    st.stalled = false;
    for (int iter = 0; iter < kMaxCenteringSteps; ++iter) {
      if (st.newton_steps >= opt_.max_newton_steps) return false;
      assemble(st.x, st.t, grad);
      if (!factorize()) {
        st.stalled = true;
        return false;
      }
      Eigen::VectorXd dx;
      Eigen::VectorXd w;
      solve_kkt(-grad, cp_.b - cp_.A * st.x, dx, w);
      // One round of iterative refinement on the full KKT system.
      {
        Eigen::VectorXd r1 = -grad - hessian_.selfadjointView<Eigen::Lower>() * dx;
        if (w.size() > 0) r1 -= cp_.A.transpose() * w;
        const Eigen::VectorXd r2 = cp_.b - cp_.A * st.x - cp_.A * dx;
        Eigen::VectorXd ddx, dw;
        solve_kkt(r1, r2, ddx, dw);
        dx += ddx;
        if (w.size() > 0) w += dw;
      }
      st.eq_dual = w / st.t;
      st.last_step = dx;
      ++st.newton_steps;
      const double lambda2 = dx.dot(hessian_.selfadjointView<Eigen::Lower>() * dx);
      const double slope = grad.dot(dx);
      if (lambda2 / 2.0 <= opt_.newton_tol) return true;

      // Largest step keeping linear rows and bounds strictly feasible.
      double alpha_max = 1.0 / 0.99;
      for (int j = 0; j < cp_.n; ++j) {
        if (dx(j) < 0.0 && std::isfinite(cp_.lo(j))) alpha_max = std::min(alpha_max, (st.x(j) - cp_.lo(j)) / -dx(j));
        if (dx(j) > 0.0 && std::isfinite(cp_.hi(j))) alpha_max = std::min(alpha_max, (cp_.hi(j) - st.x(j)) / dx(j));
      }
      for (std::size_t i = 0; i < cp_.rows.size(); ++i) {
        const auto& r = cp_.rows[i];
        g_old[i] = row_value(r, st.x, cp_.extended_entropy);
        if (!r.is_linear()) continue;
        double rate = 0.0;
        for (std::size_t k = 0; k < r.lin.idx.size(); ++k) rate += r.lin.coef[k] * dx(r.lin.idx[k]);
        if (rate > 0.0) alpha_max = std::min(alpha_max, -g_old[i] / rate);
      }
      double alpha = std::min(1.0, 0.99 * alpha_max);
      bool accepted = false;
      while (alpha > 1e-10) {
        const Eigen::VectorXd x_new = st.x + alpha * dx;
        bool feasible = false;
        const double change = merit_change(st.x, x_new, g_old, st.t, feasible);
        if (feasible && change <= 0.01 * alpha * slope) {
          Eigen::VectorXd candidate = x_new;
          restore_equalities(candidate);
          if (cp_.A.rows() > 0 && (cp_.b - cp_.A * candidate).lpNorm<Eigen::Infinity>() > kEqualityDrift) break;
          st.x = std::move(candidate);
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Rounding noise dominates once the iterate is nearly centered.
        if (lambda2 <= 1e-2) return true;
        st.stalled = true;
        return false;
      }
      if (early_stop(st.x)) return true;
    }
    return false;
  }

  const Compiled& cp_;
  SolverOptions opt_;
  double m_ = 0.0;
  std::vector<Eigen::Triplet<double>> triplets_;
  Eigen::SparseMatrix<double> hessian_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  bool schur_stale_ = true;
  Eigen::MatrixXd Y_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> schur_;
  Eigen::VectorXd local_grad_;
  Eigen::MatrixXd local_hess_;
};

Eigen::VectorXd default_start(const Compiled& cp) {
  Eigen::VectorXd x(cp.n);
  for (int j = 0; j < cp.n; ++j) {
    const bool has_lo = std::isfinite(cp.lo(j));
    const bool has_hi = std::isfinite(cp.hi(j));
    if (has_lo && has_hi) {
      x(j) = 0.5 * (cp.lo(j) + cp.hi(j));
    } else if (has_lo) {
      x(j) = cp.lo(j) + 1.0;
    } else if (has_hi) {
      x(j) = cp.hi(j) - 1.0;
    } else {
      x(j) = 0.0;
    }
  }
  return x;
}

Eigen::VectorXd full_vector(const Compiled& cp, const Eigen::VectorXd& x_free) {
  Eigen::VectorXd full = cp.fixed;
  for (int f = 0; f < cp.n; ++f) full(cp.full_of_free[static_cast<std::size_t>(f)]) = x_free(f);
  return full;
}

double convex_row_value(const ConvexConstraint& row, const Eigen::Ref<const Eigen::VectorXd>& x, double& domain) {
  double g = row.linear.evaluate(x);
  for (const auto& e : row.entropy) {
    const double y = e.argument.evaluate(x);
    domain = std::max(domain, -y);
    g += e.weight * ent_value(std::max(y, 0.0), false);
  }
  for (const auto& s : row.squares) {
    const double y = s.argument.evaluate(x);
    g += s.weight * y * y;
  }
  return g;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_affine(const AffineExpr& e) {
  std::string out = format_double(e.constant);
  for (const auto& [id, c] : e.terms) out += " " + std::to_string(id) + ":" + format_double(c);
  return out;
}

double parse_double(const std::string& token) {
  if (token == "inf") return kInf;
  if (token == "-inf") return -kInf;
  return std::stod(token);
}

AffineExpr parse_affine(std::istringstream& in) {
  AffineExpr e;
  std::string token;
  if (!(in >> token)) throw Error("schema", "missing affine constant in subproblem dump");
  e.constant = parse_double(token);
  while (in >> token) {
    if (token == "|") break;
    const auto colon = token.find(':');
    if (colon == std::string::npos) throw Error("schema", "malformed term '" + token + "' in subproblem dump");
    e.add_term(std::stol(token.substr(0, colon)), parse_double(token.substr(colon + 1)));
  }
  return e;
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::near_optimal:
      return "near_optimal";
    case SolveStatus::failed:
      return "failed";
  }
  return "failed";
}

double max_violation(const ConvexSubproblem& sp, const Eigen::Ref<const Eigen::VectorXd>& x) {
  double worst = 0.0;
  for (Index j = 0; j < sp.num_variables(); ++j) {
    const auto& v = sp.variables[static_cast<std::size_t>(j)];
    worst = std::max({worst, v.lower - x(j), x(j) - v.upper});
  }
  for (const auto& lc : sp.linear) {
    const double value = lc.expr.evaluate(x) - lc.bound;
    switch (lc.relation) {
      case Relation::less_equal:
        worst = std::max(worst, value);
        break;
      case Relation::greater_equal:
        worst = std::max(worst, -value);
        break;
      case Relation::equal:
        worst = std::max(worst, std::abs(value));
        break;
    }
  }
  for (const auto& row : sp.convex) {
    double domain = 0.0;
    worst = std::max({worst, convex_row_value(row, x, domain), domain});
  }
  return std::isnan(worst) ? kInf : worst;
}

SubproblemSolution solve_subproblem(const ConvexSubproblem& sp, const SolverOptions& options) {
  SubproblemSolution sol;
  sol.linear_duals = Eigen::VectorXd::Zero(static_cast<Index>(sp.linear.size()));
  sol.convex_duals = Eigen::VectorXd::Zero(static_cast<Index>(sp.convex.size()));
  sol.lower_duals = Eigen::VectorXd::Zero(sp.num_variables());
  sol.upper_duals = Eigen::VectorXd::Zero(sp.num_variables());

  std::string error;
  const Compiled cp = compile(sp, error);
  if (!error.empty()) {
    sol.status = SolveStatus::failed;
    sol.message = error;
    sol.values = Eigen::VectorXd::Zero(sp.num_variables());
    return sol;
  }

  Eigen::VectorXd x;
  bool have_start = false;
  if (sp.initial_point && sp.initial_point->size() == sp.num_variables()) {
    x.resize(cp.n);
    for (int f = 0; f < cp.n; ++f) x(f) = (*sp.initial_point)(cp.full_of_free[static_cast<std::size_t>(f)]);
    have_start = strictly_feasible(cp, x);
  }
  int newton_steps = 0;
  if (!have_start) {
    if (!sp.initial_point || sp.initial_point->size() != sp.num_variables()) x = default_start(cp);
    if (cp.A.rows() > 0) {
      const Eigen::VectorXd r = cp.b - cp.A * x;
      x += cp.A.transpose() * (cp.A * cp.A.transpose()).completeOrthogonalDecomposition().solve(r);
    }
    const Compiled p1 = phase_one(cp);
    Eigen::VectorXd x1(p1.n);
    x1.head(cp.n) = x;
    double worst = -kInf;
    for (const auto& r : p1.rows) worst = std::max(worst, row_value(r, [&] {
                                                     Eigen::VectorXd z = x1;
                                                     z(cp.n) = 0.0;
                                                     return z;
                                                   }(), true));
    x1(cp.n) = std::max(worst, -0.5) + 1.0;
    BarrierSolver phase1(p1, options);
    auto done = [&](const Eigen::VectorXd& z) { return z(cp.n) < 0.0 && strictly_feasible(cp, z.head(cp.n)); };
    const auto st = phase1.run(x1, done);
    newton_steps += st.newton_steps;
    if (!done(st.x)) {
      sol.status = SolveStatus::failed;
      sol.message = "no strictly feasible point found";
      sol.values = full_vector(cp, st.x.head(cp.n));
      sol.newton_steps = newton_steps;
      sol.max_violation = max_violation(sp, sol.values);
      return sol;
    }
    x = st.x.head(cp.n);
  }

  BarrierSolver solver(cp, options);
  const auto st = solver.run(x, [](const Eigen::VectorXd&) { return false; });
  newton_steps += st.newton_steps;

  sol.values = full_vector(cp, st.x);
  sol.objective = sp.objective.evaluate(sol.values);
  sol.max_violation = max_violation(sp, sol.values);
  sol.gap = st.gap;
  sol.newton_steps = newton_steps;

  // Barrier multipliers with a first-order correction along the last
  // Newton step, which keeps the stationarity residual second order.
  const Eigen::VectorXd step = st.last_step.size() == cp.n ? st.last_step : Eigen::VectorXd::Zero(cp.n);
  for (std::size_t i = 0; i < cp.rows.size(); ++i) {
    const auto& r = cp.rows[i];
    const double slack = -row_value(r, st.x, false);
    const double lambda = std::max(0.0, (1.0 + row_slope(r, st.x, step, false) / slack) / (st.t * slack));
    if (r.origin == Origin::linear) sol.linear_duals(r.origin_index) = lambda;
    if (r.origin == Origin::convex) sol.convex_duals(r.origin_index) = lambda;
  }
  for (std::size_t i = 0; i < cp.eq_origin.size(); ++i) {
    sol.linear_duals(cp.eq_origin[i]) = st.eq_dual(static_cast<Index>(i));
  }
  for (int f = 0; f < cp.n; ++f) {
    const int j = cp.full_of_free[static_cast<std::size_t>(f)];
    if (std::isfinite(cp.lo(f))) {
      const double d = st.x(f) - cp.lo(f);
      sol.lower_duals(j) = std::max(0.0, (1.0 - step(f) / d) / (st.t * d));
    }
    if (std::isfinite(cp.hi(f))) {
      const double d = cp.hi(f) - st.x(f);
      sol.upper_duals(j) = std::max(0.0, (1.0 + step(f) / d) / (st.t * d));
    }
  }

  const bool feasible = sol.max_violation <= options.feasibility_tol;
  if (st.converged && feasible) {
    sol.status = SolveStatus::optimal;
  } else if (feasible && st.gap <= 1e-4) {
    sol.status = SolveStatus::near_optimal;
    sol.message = "stopped before reaching the gap tolerance";
  } else {
    sol.status = SolveStatus::failed;
    sol.message = feasible ? "barrier method stalled" : "returned point violates constraints";
  }
  return sol;
}

KktReport kkt_check(const ConvexSubproblem& sp, const SubproblemSolution& sol, double tol) {
  KktReport report;
  const auto& x = sol.values;
  report.primal_violation = max_violation(sp, x);
  report.primal_feasible = report.primal_violation <= tol;

  const auto n = sp.num_variables();
  // Minimization form: c = -grad(objective).
  Eigen::VectorXd residual = Eigen::VectorXd::Zero(n);
  for (const auto& [id, c] : sp.objective.terms) residual(id) -= c;

  auto add_gradient = [&](const AffineExpr& e, double scale) {
    for (const auto& [id, c] : e.terms) residual(id) += scale * c;
  };
  for (std::size_t i = 0; i < sp.linear.size(); ++i) {
    const auto& lc = sp.linear[i];
    const double lambda = i < static_cast<std::size_t>(sol.linear_duals.size()) ? sol.linear_duals(static_cast<Index>(i)) : 0.0;
    const double value = lc.expr.evaluate(x) - lc.bound;
    switch (lc.relation) {
      case Relation::less_equal:
        add_gradient(lc.expr, lambda);
        report.complementarity = std::max(report.complementarity, std::abs(lambda * value));
        break;
      case Relation::greater_equal:
        add_gradient(lc.expr, -lambda);
        report.complementarity = std::max(report.complementarity, std::abs(lambda * value));
        break;
      case Relation::equal:
        add_gradient(lc.expr, lambda);
        break;
    }
  }
  for (std::size_t i = 0; i < sp.convex.size(); ++i) {
    const auto& row = sp.convex[i];
    const double lambda = i < static_cast<std::size_t>(sol.convex_duals.size()) ? sol.convex_duals(static_cast<Index>(i)) : 0.0;
    double domain = 0.0;
    report.complementarity = std::max(report.complementarity, std::abs(lambda * convex_row_value(row, x, domain)));
    add_gradient(row.linear, lambda);
    for (const auto& e : row.entropy) {
      const double y = std::max(e.argument.evaluate(x), 1e-300);
      add_gradient(e.argument, lambda * e.weight * (std::log(y) + 1.0));
    }
    for (const auto& s : row.squares) add_gradient(s.argument, lambda * 2.0 * s.weight * s.argument.evaluate(x));
  }
  for (Index j = 0; j < n; ++j) {
    const auto& v = sp.variables[static_cast<std::size_t>(j)];
    if (v.lower == v.upper) {
      residual(j) = 0.0;  // fixed variables carry a free multiplier
      continue;
    }
    if (j < sol.lower_duals.size() && std::isfinite(v.lower)) {
      residual(j) -= sol.lower_duals(j);
      report.complementarity = std::max(report.complementarity, std::abs(sol.lower_duals(j) * (x(j) - v.lower)));
    }
    if (j < sol.upper_duals.size() && std::isfinite(v.upper)) {
      residual(j) += sol.upper_duals(j);
      report.complementarity = std::max(report.complementarity, std::abs(sol.upper_duals(j) * (v.upper - x(j))));
    }
  }
  report.stationarity = n > 0 ? residual.lpNorm<Eigen::Infinity>() : 0.0;
  return report;
}

std::string dump_subproblem(const ConvexSubproblem& sp) {
  std::ostringstream out;
  out << "maxent-subproblem 1\n";
  for (const auto& v : sp.variables) {
    std::string name = v.name.empty() ? "_" : v.name;
    std::replace(name.begin(), name.end(), ' ', '_');
    out << "var " << name << " " << format_double(v.lower) << " " << format_double(v.upper) << "\n";
  }
  out << "objective " << format_affine(sp.objective) << "\n";
  for (const auto& lc : sp.linear) {
    const char* rel = lc.relation == Relation::less_equal ? "le" : lc.relation == Relation::greater_equal ? "ge" : "eq";
    out << "linear " << rel << " " << format_double(lc.bound) << " " << format_affine(lc.expr) << "\n";
  }
  for (const auto& row : sp.convex) {
    std::string name = row.name.empty() ? "_" : row.name;
    std::replace(name.begin(), name.end(), ' ', '_');
    out << "convex " << name << " " << format_affine(row.linear);
    for (const auto& e : row.entropy) out << " | ent " << format_double(e.weight) << " " << format_affine(e.argument);
    for (const auto& s : row.squares) out << " | sq " << format_double(s.weight) << " " << format_affine(s.argument);
    out << "\n";
  }
  return out.str();
}

ConvexSubproblem parse_subproblem_dump(std::string_view text) {
  ConvexSubproblem sp;
  std::istringstream lines{std::string(text)};
  std::string line;
  if (!std::getline(lines, line) || line.rfind("maxent-subproblem", 0) != 0) {
    throw Error("schema", "missing subproblem dump header");
  }
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    if (kind == "var") {
      std::string name, lo, hi;
      in >> name >> lo >> hi;
      sp.add_variable(name, parse_double(lo), parse_double(hi));
    } else if (kind == "objective") {
      sp.objective = parse_affine(in);
    } else if (kind == "linear") {
      std::string rel, bound;
      in >> rel >> bound;
      LinearConstraint lc;
      lc.relation = rel == "le" ? Relation::less_equal : rel == "ge" ? Relation::greater_equal : Relation::equal;
      lc.bound = parse_double(bound);
      lc.expr = parse_affine(in);
      sp.linear.push_back(std::move(lc));
    } else if (kind == "convex") {
      ConvexConstraint row;
      in >> row.name;
      row.linear = parse_affine(in);
      std::string term;
      while (in >> term) {
        std::string weight;
        in >> weight;
        if (term == "ent") {
          const double w = parse_double(weight);
          row.entropy.push_back({parse_affine(in), w});
        } else if (term == "sq") {
          const double w = parse_double(weight);
          row.squares.push_back({parse_affine(in), w});
        } else {
          throw Error("schema", "unknown term kind '" + term + "' in subproblem dump");
        }
      }
      sp.convex.push_back(std::move(row));
    } else {
      throw Error("schema", "unknown line kind '" + kind + "' in subproblem dump");
    }
  }
  return sp;
}

}  // namespace maxent
