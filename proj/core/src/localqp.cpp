#include "evcoord/localqp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "evcoord/dense_qp.hpp"
#include "evcoord/errors.hpp"

namespace evcoord {

LocalQp make_local_qp(const BatteryPolytope& polytope, const CouplingSystem& coupling, int agent,
                      const EvSpec& spec, const Eigen::VectorXd& price, double step_hours,
                      const Eigen::VectorXd& nu, const Eigen::VectorXd& neighbor_sum, double rho,
                      int degree, ProximalScaling scaling) {
  if (degree <= 0) throw ConfigError("agent without neighbours");
  if (!(rho > 0.0)) throw ConfigError("penalty rho must be positive");
  const int m = coupling.rows();
  if (nu.size() != m || neighbor_sum.size() != m) throw ContractError("dual vector length mismatch");
  if (price.size() != coupling.horizon()) throw ContractError("price length mismatch");

  LocalQp qp;
  qp.polytope = &polytope;
  qp.coupling = &coupling;
  qp.agent = agent;
  qp.kappa = spec.kappa;
  qp.linear = step_hours * price;
  const double n_agents = static_cast<double>(coupling.customers());
  const auto& w = coupling.headroom();
  if (scaling == ProximalScaling::as_printed) {
    // ρ/(4|𝒩ₙ|) · ‖(1/ρ)(ξu - w/N) - (1/ρ)ν + S‖²
    const double outer = rho / (4.0 * degree);
    qp.weight = outer / (rho * rho);
    qp.target = rho * (w / (n_agents * rho) + nu / rho - neighbor_sum);
  } else {
    qp.weight = 1.0 / (4.0 * rho * degree);
    qp.target = w / n_agents + nu - rho * neighbor_sum;
  }
  return qp;
}

double local_objective(const LocalQp& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& s) {
  double value = qp.kappa * x.squaredNorm() + qp.linear.dot(x);
  if (qp.coupling->rows() > 0) {
    value += qp.weight * (qp.coupling->apply(qp.agent, x) + s - qp.target).squaredNorm();
  }
  return value;
}

namespace {

// Coupling rows restricted to the free steps of one agent.
struct FreeCoupling {
  const CouplingSystem& c;
  const std::vector<int>& free;
  Eigen::MatrixXd thermal;  // T×f
  Eigen::VectorXd d;        // ϰ

  FreeCoupling(const CouplingSystem& coupling, int agent, const std::vector<int>& free_steps)
      : c(coupling), free(free_steps) {
    const int T = c.horizon();
    const auto f = static_cast<Eigen::Index>(free.size());
    thermal.resize(T, f);
    for (Eigen::Index j = 0; j < f; ++j) thermal.col(j) = c.thermal_map().col(free[static_cast<std::size_t>(j)]);
    d = c.voltage_sensitivity().col(agent);
  }

  // Gram matrix and Γ_Pᵀ target_P over the rows with mask(r) set.
  void model(const std::vector<char>& mask, const Eigen::VectorXd& target, Eigen::MatrixXd& gram,
             Eigen::VectorXd& rhs) const {
    const int T = c.horizon();
    const int n_sp = c.supply_points();
    const auto f = thermal.cols();
    gram.setZero(f, f);
    rhs.setZero(f);
    if (c.rows() == 0) return;
    std::vector<int> rows;
    for (int t = 0; t < T; ++t) {
      if (mask[static_cast<std::size_t>(t)]) rows.push_back(t);
    }
    if (!rows.empty()) {
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), f);
      Eigen::VectorXd sub_target(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = thermal.row(rows[i]);
        sub_target(static_cast<Eigen::Index>(i)) = target(rows[i]);
      }
      gram.selfadjointView<Eigen::Lower>().rankUpdate(sub.transpose());
      gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
      rhs.noalias() += sub.transpose() * sub_target;
    }
    for (Eigen::Index j = 0; j < f; ++j) {
      const int t = free[static_cast<std::size_t>(j)];
      double diag = 0.0;
      double lin = 0.0;
      for (int k = 0; k < n_sp; ++k) {
        const int up = c.upper_row(t, k);
        const int lo = c.lower_row(t, k);
        if (mask[static_cast<std::size_t>(up)]) {
          diag += d(k) * d(k);
          lin += d(k) * target(up);
        }
        if (mask[static_cast<std::size_t>(lo)]) {
          diag += d(k) * d(k);
          lin -= d(k) * target(lo);
        }
      }
      gram(j, j) += diag;
      rhs(j) += lin;
    }
  }
};

// The problem in (x, s) jointly as one strictly convex QP. Slower than the
// Newton iteration, used only when that stalls.
Eigen::VectorXd solve_joint(const LocalQp& qp, const FreeCoupling& fc) {
  const auto& poly = *qp.polytope;
  const auto& coupling = *qp.coupling;
  const int m = coupling.rows();
  const int f = poly.num_free();
  Eigen::MatrixXd gamma(m, f);
  for (int j = 0; j < f; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(poly.horizon());
    e[fc.free[static_cast<std::size_t>(j)]] = 1.0;
    gamma.col(j) = coupling.apply(qp.agent, e);
  }
  const double w2 = 2.0 * qp.weight;
  QpProblem p;
  p.hessian.resize(f + m, f + m);
  p.hessian.topLeftCorner(f, f) = w2 * gamma.transpose() * gamma;
  p.hessian.topLeftCorner(f, f).diagonal().array() += 2.0 * qp.kappa;
  p.hessian.topRightCorner(f, m) = w2 * gamma.transpose();
  p.hessian.bottomLeftCorner(m, f) = w2 * gamma;
  p.hessian.bottomRightCorner(m, m) = w2 * Eigen::MatrixXd::Identity(m, m);
  p.linear.resize(f + m);
  p.linear.head(f) = poly.restrict(qp.linear) - w2 * gamma.transpose() * qp.target;
  p.linear.tail(m) = -w2 * qp.target;

  std::vector<Eigen::Triplet<double>> trip;
  for (int r = 0; r < poly.free_eq.rows(); ++r)
    for (SparseRows::InnerIterator it(poly.free_eq, r); it; ++it) trip.emplace_back(r, static_cast<int>(it.col()), it.value());
  p.eq.resize(poly.free_eq.rows(), f + m);
  p.eq.setFromTriplets(trip.begin(), trip.end());
  p.eq_rhs = poly.free_eq_rhs;

  trip.clear();
  const auto n_box = poly.free_ineq.rows();
  for (int r = 0; r < n_box; ++r)
    for (SparseRows::InnerIterator it(poly.free_ineq, r); it; ++it) trip.emplace_back(r, static_cast<int>(it.col()), it.value());
  for (int i = 0; i < m; ++i) trip.emplace_back(static_cast<int>(n_box) + i, f + i, 1.0);
  p.ineq.resize(n_box + m, f + m);
  p.ineq.setFromTriplets(trip.begin(), trip.end());
  p.ineq_rhs.resize(n_box + m);
  p.ineq_rhs << poly.free_ineq_rhs, Eigen::VectorXd::Zero(m);
  return solve_qp(p).x.head(f);
}

}  // namespace

LocalSolution solve(const LocalQp& qp, const Eigen::VectorXd* warm_start, const LocalSolveOptions& options) {
  if (qp.polytope == nullptr || qp.coupling == nullptr) throw ContractError("LocalQp not initialized");
  const auto& poly = *qp.polytope;
  const auto& coupling = *qp.coupling;
  const int T = poly.horizon();
  const int m = coupling.rows();
  const int f = poly.num_free();
  if (qp.linear.size() != T || qp.target.size() != m || coupling.horizon() != T) {
    throw ContractError("LocalQp dimensions inconsistent");
  }
  if (!(options.tol > 0.0)) throw ContractError("tolerance must be positive");

  LocalSolution out;
  auto finish = [&](const Eigen::VectorXd& x_full, double stationarity, int iters) {
    out.x = x_full;
    if (m > 0) {
      const Eigen::VectorXd gx = coupling.apply(qp.agent, x_full);
      out.s = (qp.target - gx).cwiseMax(0.0);
    } else {
      out.s.resize(0);
    }
    out.objective = local_objective(qp, out.x, out.s);
    out.stationarity = stationarity;
    out.outer_iterations = iters;
    return out;
  };

  if (f == 0) return finish(Eigen::VectorXd::Zero(T), 0.0, 0);

  const FreeCoupling fc(coupling, qp.agent, poly.free_steps);
  const Eigen::VectorXd linear_free = poly.restrict(qp.linear);

  Eigen::VectorXd x = (warm_start != nullptr && poly.contains(*warm_start, 1e-9)) ? poly.restrict(*warm_start)
                                                                                    : poly.restrict(poly.feasible_point);

  auto residual = [&](const Eigen::VectorXd& x_free) -> Eigen::VectorXd {
    if (m == 0) return Eigen::VectorXd(0);
    return coupling.apply(qp.agent, poly.expand(x_free)) - qp.target;
  };
  // ∇F over the free steps for residual r = Γx - target.
  auto gradient = [&](const Eigen::VectorXd& x_free, const Eigen::VectorXd& r) -> Eigen::VectorXd {
    Eigen::VectorXd g = 2.0 * qp.kappa * x_free + linear_free;
    if (m > 0) g += 2.0 * qp.weight * poly.restrict(coupling.apply_transpose(qp.agent, r.cwiseMax(0.0)));
    return g;
  };

  QpProblem model;
  model.eq = poly.free_eq;
  model.eq_rhs = poly.free_eq_rhs;
  model.ineq = poly.free_ineq;
  model.ineq_rhs = poly.free_ineq_rhs;

  const double tie = 1e-14;
  const double tol = options.tol * (1.0 + linear_free.lpNorm<Eigen::Infinity>());
  std::vector<char> mask(static_cast<std::size_t>(m), 0);
  Eigen::MatrixXd gram;
  Eigen::VectorXd gram_rhs;
  Eigen::VectorXd r = residual(x);
  double best_station = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= options.max_outer_iterations; ++it) {
    const double scale = 1.0 + qp.target.lpNorm<Eigen::Infinity>();
    for (int i = 0; i < m; ++i) mask[static_cast<std::size_t>(i)] = r(i) > tie * scale ? 1 : 0;

    fc.model(mask, qp.target, gram, gram_rhs);
    model.hessian = 2.0 * qp.weight * gram;
    model.hessian.diagonal().array() += 2.0 * qp.kappa;
    model.linear = linear_free - 2.0 * qp.weight * gram_rhs;
    const QpResult sub = solve_qp(model);

    const Eigen::VectorXd r_new = residual(sub.x);
    bool consistent = true;
    for (int i = 0; i < m && consistent; ++i) {
      const bool in = mask[static_cast<std::size_t>(i)] != 0;
      if ((in && r_new(i) < -tie * scale) || (!in && r_new(i) > tie * scale)) consistent = false;
    }

    // Stationarity of the true objective with the sub-QP multipliers.
    auto kkt = [&](const Eigen::VectorXd& xf, const Eigen::VectorXd& rf) {
      Eigen::VectorXd g = gradient(xf, rf);
      g -= poly.free_ineq.transpose() * sub.ineq_multipliers;
      g -= poly.free_eq.transpose() * sub.eq_multipliers;
      return g.lpNorm<Eigen::Infinity>();
    };

    {
      const double station = kkt(sub.x, r_new);
      if (station <= tol) return finish(poly.expand(sub.x), station, it);
      if (consistent) best_station = std::min(best_station, station);
    }

    // Exact line search on φ(τ) = F(x + τ dir), τ ∈ [0, 1]. φ' is piecewise
    // linear and nondecreasing with kinks where a residual changes sign.
    const Eigen::VectorXd dir = sub.x - x;
    if (dir.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      const double station = kkt(x, r);
      if (station <= tol) return finish(poly.expand(x), station, it);
      best_station = std::min(best_station, station);
      break;
    }
    const Eigen::VectorXd q = r_new - r;  // Γ dir
    const double a0 = dir.dot(2.0 * qp.kappa * x + linear_free);
    const double b0 = 2.0 * qp.kappa * dir.squaredNorm();
    struct Kink {
      double at;
      double dq;  // slope change contributed by this row
      double d0;  // intercept change
    };
    std::vector<Kink> kinks;
    double a = a0;
    double b = b0;
    for (int i = 0; i < m; ++i) {
      const double qi = q(i);
      const double ri = r(i);
      const double w2 = 2.0 * qp.weight;
      if (ri > 0.0) {
        a += w2 * ri * qi;
        b += w2 * qi * qi;
        if (qi < 0.0) kinks.push_back({-ri / qi, -w2 * qi * qi, -w2 * ri * qi});
      } else if (qi > 0.0) {
        kinks.push_back({-ri / qi, w2 * qi * qi, w2 * ri * qi});
      }
    }
    std::sort(kinks.begin(), kinks.end(), [](const Kink& l, const Kink& rr) { return l.at < rr.at; });
    double step = 1.0;
    double lo = 0.0;
    bool found = false;
    for (const auto& k : kinks) {
      if (k.at >= 1.0) break;
      const double hi = std::max(k.at, lo);
      if (a + b * hi >= 0.0) {
        step = b > 0.0 ? std::clamp(-a / b, lo, hi) : lo;
        found = true;
        break;
      }
      a += k.d0;
      b += k.dq;
      lo = hi;
    }
    if (!found) {
      step = (a + b >= 0.0 && b > 0.0) ? std::clamp(-a / b, lo, 1.0) : 1.0;
    }
    if (step <= 0.0) break;
    x += step * dir;
    r = (step == 1.0) ? r_new : residual(x);
  }

  if (qp.kappa > 0.0 && m > 0) return finish(poly.expand(solve_joint(qp, fc)), 0.0, options.max_outer_iterations);
  throw SolverFailure("local QP: generalized Newton did not converge", poly.expand(x), best_station);
}

}  // namespace evcoord
