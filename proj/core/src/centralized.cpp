#include "evcoord/centralized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evcoord/dense_qp.hpp"
#include "evcoord/errors.hpp"

namespace evcoord {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// min ½ zᵀ diag(p) z + qᵀz  s.t.  l ≤ A z ≤ u over the free steps of every EV.
struct StackedQp {
  int n = 0;
  std::vector<int> offset;
  Eigen::VectorXd p_diag;
  Eigen::VectorXd q;
  SparseRows a;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
  std::vector<int> coupling_row;  // per row of a; -1 for battery rows
};

StackedQp stack(const std::vector<EvSpec>& fleet, const std::vector<BatteryPolytope>& polytopes,
                const CouplingSystem& coupling, const Eigen::VectorXd& price, double step_hours) {
  if (fleet.size() != polytopes.size()) throw ContractError("fleet and polytope counts differ");
  if (coupling.rows() > 0 && coupling.customers() != static_cast<int>(fleet.size()))
    throw ContractError("coupling system built for a different fleet");
  StackedQp s;
  for (const auto& poly : polytopes) {
    s.offset.push_back(s.n);
    s.n += poly.num_free();
  }
  s.p_diag.resize(s.n);
  s.q.resize(s.n);
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    const auto& poly = polytopes[k];
    if (price.size() != poly.horizon()) throw ContractError("price length differs from horizon");
    for (int j = 0; j < poly.num_free(); ++j) {
      const int t = poly.free_steps[static_cast<std::size_t>(j)];
      s.p_diag[s.offset[k] + j] = 2.0 * fleet[k].kappa;
      s.q[s.offset[k] + j] = step_hours * price[t];
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> lo, hi;
  int row = 0;
  for (std::size_t k = 0; k < polytopes.size(); ++k) {
    const auto& poly = polytopes[k];
    for (int r = 0; r < poly.free_ineq.rows(); ++r, ++row) {
      for (SparseRows::InnerIterator it(poly.free_ineq, r); it; ++it)
        trip.emplace_back(row, s.offset[k] + static_cast<int>(it.col()), it.value());
      lo.push_back(poly.free_ineq_rhs[r]);
      hi.push_back(kInf);
      s.coupling_row.push_back(-1);
    }
    for (int r = 0; r < poly.free_eq.rows(); ++r, ++row) {
      for (SparseRows::InnerIterator it(poly.free_eq, r); it; ++it)
        trip.emplace_back(row, s.offset[k] + static_cast<int>(it.col()), it.value());
      lo.push_back(poly.free_eq_rhs[r]);
      hi.push_back(poly.free_eq_rhs[r]);
      s.coupling_row.push_back(-1);
    }
  }
  if (coupling.rows() > 0) {
    std::vector<Eigen::MatrixXd> gamma;
    for (std::size_t k = 0; k < polytopes.size(); ++k) gamma.push_back(coupling.dense(static_cast<int>(k)));
    for (int r = 0; r < coupling.rows(); ++r) {
      bool any = false;
      for (std::size_t k = 0; k < polytopes.size(); ++k) {
        const auto& poly = polytopes[k];
        for (int j = 0; j < poly.num_free(); ++j) {
          const double v = gamma[k](r, poly.free_steps[static_cast<std::size_t>(j)]);
          if (v != 0.0) {
            trip.emplace_back(row, s.offset[k] + j, v);
            any = true;
          }
        }
      }
      if (!any) {
        if (coupling.headroom()[r] < 0.0)
          throw ScenarioInfeasible("network limit broken regardless of EV schedules", {coupling.row_label(r)});
        continue;
      }
      lo.push_back(-kInf);
      hi.push_back(coupling.headroom()[r]);
      s.coupling_row.push_back(r);
      ++row;
    }
  }
  s.a.resize(row, s.n);
  s.a.setFromTriplets(trip.begin(), trip.end());
  s.a.makeCompressed();
  s.l = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  s.u = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return s;
}

double violation(const StackedQp& s, const Eigen::VectorXd& ax) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < ax.size(); ++i) v = std::max({v, s.l[i] - ax[i], ax[i] - s.u[i]});
  return v;
}

std::vector<std::string> coupling_rows_in(const StackedQp& s, const CouplingSystem& coupling,
                                          const Eigen::VectorXd& dy) {
  std::vector<std::string> out;
  const double scale = dy.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    const int r = s.coupling_row[static_cast<std::size_t>(i)];
    if (r >= 0 && std::abs(dy[i]) > 1e-6 * scale) out.push_back(coupling.row_label(r));
  }
  return out;
}

Eigen::MatrixXd unstack(const StackedQp& s, const std::vector<BatteryPolytope>& polytopes,
                        const Eigen::VectorXd& z) {
  const int T = polytopes.empty() ? 0 : polytopes.front().horizon();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(polytopes.size()), T);
  for (std::size_t k = 0; k < polytopes.size(); ++k)
    x.row(static_cast<Eigen::Index>(k)) =
        polytopes[k].expand(z.segment(s.offset[k], polytopes[k].num_free())).transpose();
  return x;
}

struct Iterate {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double primal = kInf;
  double dual = kInf;
  int iterations = 0;
  bool polished = false;
};

void residuals(const StackedQp& s, Iterate& it) {
  it.primal = violation(s, s.a * it.x);
  it.dual = (s.p_diag.cwiseProduct(it.x) + s.q + s.a.transpose() * it.y).lpNorm<Eigen::Infinity>();
}

/// Solves the equality-constrained QP on a guessed active set, as OSQP's
/// solution polishing does. Returns false when the guess is inconsistent.
bool polish(const StackedQp& s, const Eigen::VectorXd& z, const Eigen::VectorXd& y, double tol, Iterate& out) {
  std::vector<int> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (s.l[i] == s.u[i]) {
      rows.push_back(static_cast<int>(i));
      rhs.push_back(s.l[i]);
    } else if (z[i] - s.l[i] < -y[i]) {
      rows.push_back(static_cast<int>(i));
      rhs.push_back(s.l[i]);
    } else if (s.u[i] - z[i] < y[i]) {
      rows.push_back(static_cast<int>(i));
      rhs.push_back(s.u[i]);
    }
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  SparseRows act(m, s.n);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index k = 0; k < m; ++k)
      for (SparseRows::InnerIterator it(s.a, rows[static_cast<std::size_t>(k)]); it; ++it)
        trip.emplace_back(static_cast<int>(k), static_cast<int>(it.col()), it.value());
    act.setFromTriplets(trip.begin(), trip.end());
  }
  const Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(rhs.data(), m);

  // Regularized KKT [P+δI Aᵀ; A -δI] through its Schur complement, refined
  // against the exact KKT matrix.
  const double delta = 1e-7;
  const Eigen::VectorXd d_inv = (s.p_diag.array() + delta).inverse();
  const Eigen::SparseMatrix<double> act_t = act.transpose();
  Eigen::MatrixXd schur = Eigen::MatrixXd(act * d_inv.asDiagonal() * act_t);
  schur.diagonal().array() += delta;
  Eigen::LLT<Eigen::MatrixXd> llt(schur);
  if (llt.info() != Eigen::Success) return false;
  auto solve_reg = [&](const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx,
                       Eigen::VectorXd& dv) {
    dv = llt.solve(act * d_inv.cwiseProduct(r1) - r2);
    dx = d_inv.cwiseProduct(r1 - act_t * dv);
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.n), v = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < 40; ++k) {
    const Eigen::VectorXd r1 = -s.q - s.p_diag.cwiseProduct(x) - act_t * v;
    const Eigen::VectorXd r2 = b - act * x;
    if (k > 0 && std::max(r1.lpNorm<Eigen::Infinity>(), r2.lpNorm<Eigen::Infinity>()) < 1e-13) break;
    Eigen::VectorXd dx, dv;
    solve_reg(r1, r2, dx, dv);
    x += dx;
    v += dv;
  }

  Eigen::VectorXd y_full = Eigen::VectorXd::Zero(z.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    const int i = rows[static_cast<std::size_t>(k)];
    if (s.l[i] != s.u[i]) {
      const bool lower = b[k] == s.l[i];
      if ((lower && v[k] > tol) || (!lower && v[k] < -tol)) return false;
    }
    y_full[i] = v[k];
  }
  Iterate cand{x, y_full};
  residuals(s, cand);
  if (!std::isfinite(cand.primal) || !std::isfinite(cand.dual)) return false;
  if (cand.primal > std::max(out.primal, tol) || cand.dual > std::max(out.dual, tol)) return false;
  cand.iterations = out.iterations;
  cand.polished = true;
  out = std::move(cand);
  return true;
}

Iterate operator_splitting(const StackedQp& s, const CouplingSystem& coupling, const CentralOptions& opt) {
  const Eigen::Index m = s.a.rows();
  // Row equilibration: every constraint row gets unit ∞-norm.
  Eigen::VectorXd e(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double r = 0.0;
    for (SparseRows::InnerIterator it(s.a, i); it; ++it) r = std::max(r, std::abs(it.value()));
    e[i] = r > 0.0 ? 1.0 / r : 1.0;
  }
  StackedQp sc = s;
  sc.a = e.asDiagonal() * s.a;
  sc.l = e.cwiseProduct(s.l);
  sc.u = e.cwiseProduct(s.u);
  const Eigen::SparseMatrix<double> at = sc.a.transpose();

  const double sigma = 1e-6, alpha = 1.6;
  double rho = 0.1;
  Eigen::VectorXd rho_vec(m);
  Eigen::LLT<Eigen::MatrixXd> llt;
  auto factor = [&] {
    for (Eigen::Index i = 0; i < m; ++i) rho_vec[i] = sc.l[i] == sc.u[i] ? 1e3 * rho : rho;
    Eigen::MatrixXd k = Eigen::MatrixXd(at * rho_vec.asDiagonal() * sc.a);
    k.diagonal() += s.p_diag;
    k.diagonal().array() += sigma;
    llt.compute(k);
    if (llt.info() != Eigen::Success) throw SolverFailure("operator splitting: KKT factorization failed", {}, kInf);
  };
  factor();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.n), z = Eigen::VectorXd::Zero(m), y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y_check = y;
  const int check_every = 10;
  Iterate best;
  best.x = x;
  best.y = y;
  for (int k = 1; k <= opt.max_iterations; ++k) {
    const Eigen::VectorXd rhs = sigma * x - s.q + at * (rho_vec.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = llt.solve(rhs);
    const Eigen::VectorXd z_tilde = sc.a * x_tilde;
    x = alpha * x_tilde + (1.0 - alpha) * x;
    const Eigen::VectorXd z_hat = alpha * z_tilde + (1.0 - alpha) * z;
    const Eigen::VectorXd z_next = (z_hat + y.cwiseQuotient(rho_vec)).cwiseMax(sc.l).cwiseMin(sc.u);
    y += rho_vec.cwiseProduct(z_hat - z_next);
    z = z_next;

    if (k % check_every != 0 && k != opt.max_iterations) continue;
    const Eigen::VectorXd ax = sc.a * x;
    const Eigen::VectorXd px = s.p_diag.cwiseProduct(x);
    const Eigen::VectorXd aty = at * y;
    const double rp = (ax - z).lpNorm<Eigen::Infinity>();
    const double rd = (px + s.q + aty).lpNorm<Eigen::Infinity>();
    const double eps_p = opt.tol * (1.0 + std::max(ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>()));
    const double eps_d = opt.tol * (1.0 + std::max({px.lpNorm<Eigen::Infinity>(), aty.lpNorm<Eigen::Infinity>(),
                                                    s.q.lpNorm<Eigen::Infinity>()}));
    best.iterations = k;
    best.x = x;
    best.y = e.cwiseProduct(y);
    if (rp <= eps_p && rd <= eps_d) break;

    // Primal infeasibility certificate on the change in y.
    const Eigen::VectorXd dy = y - y_check;
    y_check = y;
    const double dy_norm = dy.lpNorm<Eigen::Infinity>();
    if (dy_norm > 1e-8) {
      const double eps_inf = 1e-7 * dy_norm;
      bool certificate = (at * dy).lpNorm<Eigen::Infinity>() <= eps_inf;
      double support = 0.0;
      for (Eigen::Index i = 0; certificate && i < m; ++i) {
        if (dy[i] > eps_inf) {
          if (std::isinf(sc.u[i])) certificate = false; else support += sc.u[i] * dy[i];
        } else if (dy[i] < -eps_inf) {
          if (std::isinf(sc.l[i])) certificate = false; else support += sc.l[i] * dy[i];
        }
      }
      if (certificate && support < -eps_inf)
        throw ScenarioInfeasible("no EV schedule satisfies the network limits", coupling_rows_in(s, coupling, dy));
    }

    if (k % (5 * check_every) == 0) {
      const double num = rp / (1e-30 + std::max(ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>()));
      const double den = rd / (1e-30 + std::max({px.lpNorm<Eigen::Infinity>(), aty.lpNorm<Eigen::Infinity>(),
                                                  s.q.lpNorm<Eigen::Infinity>()}));
      const double rho_new = std::clamp(rho * std::sqrt(num / std::max(den, 1e-30)), 1e-6, 1e6);
      if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
        rho = rho_new;
        factor();
      }
    }
  }
  residuals(s, best);
  if (opt.polish) {
    Eigen::VectorXd z_unscaled = e.cwiseInverse().cwiseProduct(z);
    polish(s, z_unscaled, best.y, 1e-7, best);
  }
  return best;
}

Iterate active_set(const StackedQp& s) {
  if ((s.p_diag.array() <= 0.0).any())
    throw ConfigError("the active-set oracle needs kappa > 0 for every EV");
  QpProblem qp;
  qp.hessian = Eigen::MatrixXd(s.p_diag.asDiagonal());
  qp.linear = s.q;
  std::vector<Eigen::Triplet<double>> eq_t, in_t;
  std::vector<double> eq_b, in_b;
  std::vector<std::pair<int, double>> eq_src, in_src;  // (row of a, sign)
  for (Eigen::Index i = 0; i < s.a.rows(); ++i) {
    auto add = [&](std::vector<Eigen::Triplet<double>>& t, std::vector<double>& b, double sign, double rhs) {
      const int r = static_cast<int>(b.size());
      for (SparseRows::InnerIterator it(s.a, i); it; ++it)
        t.emplace_back(r, static_cast<int>(it.col()), sign * it.value());
      b.push_back(sign * rhs);
    };
    if (s.l[i] == s.u[i]) {
      add(eq_t, eq_b, 1.0, s.l[i]);
      eq_src.emplace_back(static_cast<int>(i), 1.0);
      continue;
    }
    if (std::isfinite(s.l[i])) {
      add(in_t, in_b, 1.0, s.l[i]);
      in_src.emplace_back(static_cast<int>(i), 1.0);
    }
    if (std::isfinite(s.u[i])) {
      add(in_t, in_b, -1.0, s.u[i]);
      in_src.emplace_back(static_cast<int>(i), -1.0);
    }
  }
  qp.eq.resize(static_cast<Eigen::Index>(eq_b.size()), s.n);
  qp.eq.setFromTriplets(eq_t.begin(), eq_t.end());
  qp.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_b.data(), static_cast<Eigen::Index>(eq_b.size()));
  qp.ineq.resize(static_cast<Eigen::Index>(in_b.size()), s.n);
  qp.ineq.setFromTriplets(in_t.begin(), in_t.end());
  qp.ineq_rhs = Eigen::Map<Eigen::VectorXd>(in_b.data(), static_cast<Eigen::Index>(in_b.size()));
  QpOptions qo;
  qo.feasibility_tol = 1e-11;
  const auto res = solve_qp(qp, qo);

  Iterate it;
  it.x = res.x;
  it.y = Eigen::VectorXd::Zero(s.a.rows());
  // ∇f = Σ multiplier·row; in the l ≤ Ax ≤ u convention y = -multiplier·sign.
  for (std::size_t k = 0; k < eq_src.size(); ++k) it.y[eq_src[k].first] -= res.eq_multipliers[static_cast<Eigen::Index>(k)];
  for (std::size_t k = 0; k < in_src.size(); ++k)
    it.y[in_src[k].first] -= in_src[k].second * res.ineq_multipliers[static_cast<Eigen::Index>(k)];
  it.iterations = res.iterations;
  residuals(s, it);
  return it;
}

}  // namespace

CentralSolution solve_centralized(const std::vector<EvSpec>& fleet, const std::vector<BatteryPolytope>& polytopes,
                                  const CouplingSystem& coupling, const Eigen::VectorXd& price, double step_hours,
                                  const CentralOptions& options) {
  const StackedQp s = stack(fleet, polytopes, coupling, price, step_hours);
  Iterate it;
  if (options.method == CentralMethod::active_set) {
    try {
      it = active_set(s);
    } catch (const ScenarioInfeasible&) {
      throw ScenarioInfeasible("no EV schedule satisfies the network limits", {});
    }
  } else {
    it = operator_splitting(s, coupling, options);
  }

  const double scale_p = 1.0 + s.u.cwiseAbs().unaryExpr([](double v) { return std::isinf(v) ? 0.0 : v; })
                                   .lpNorm<Eigen::Infinity>();
  const double scale_d = 1.0 + s.q.lpNorm<Eigen::Infinity>();
  if (it.primal > 1e3 * options.tol * scale_p || it.dual > 1e3 * options.tol * scale_d) {
    throw SolverFailure("centralized solve did not reach tolerance (primal " + std::to_string(it.primal) +
                            ", dual " + std::to_string(it.dual) + ")",
                        it.x, std::max(it.primal, it.dual));
  }

  CentralSolution out;
  out.x = unstack(s, polytopes, it.x);
  out.objective = 0.0;
  for (std::size_t k = 0; k < fleet.size(); ++k)
    out.objective += operational_cost(fleet[k], price, step_hours, out.x.row(static_cast<Eigen::Index>(k)).transpose());
  out.iterations = it.iterations;
  out.primal_residual = it.primal;
  out.dual_residual = it.dual;
  out.polished = it.polished;
  return out;
}

}  // namespace evcoord
