#include "evcoord/dense_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evcoord/errors.hpp"

namespace evcoord {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Factorization of the working set: J Jᵀ = H⁻¹ throughout, and Jᵀ N = [R; 0]
// for the matrix N of active normals, R upper triangular (iq×iq).
struct ActiveSet {
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;
  Eigen::VectorXd u;           // multipliers, u(iq) belongs to the candidate row
  std::vector<int> ids;        // constraint ids; equalities are -(i+1)
  int iq = 0;
  double r_norm = 1.0;

  explicit ActiveSet(Eigen::Index n)
      : R(Eigen::MatrixXd::Zero(n, n)), u(Eigen::VectorXd::Zero(n + 1)), ids(static_cast<std::size_t>(n) + 1, 0) {}

  void add(Eigen::VectorXd& d) {
    const Eigen::Index n = J.rows();
    for (Eigen::Index j = n - 1; j > iq; --j) {
      double cc = d(j - 1);
      double ss = d(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = J(k, j - 1);
        const double t2 = J(k, j);
        J(k, j - 1) = t1 * cc + t2 * ss;
        J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
      }
    }
    ++iq;
    R.col(iq - 1).head(iq) = d.head(iq);
    r_norm = std::max(r_norm, std::abs(d(iq - 1)));
  }

  void remove(int id, int first_ineq_slot) {
    const Eigen::Index n = J.rows();
    int qq = -1;
    for (int i = first_ineq_slot; i < iq; ++i) {
      if (ids[static_cast<std::size_t>(i)] == id) {
        qq = i;
        break;
      }
    }
    if (qq < 0) return;
    for (int i = qq; i < iq - 1; ++i) {
      ids[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(i) + 1];
      u(i) = u(i + 1);
      R.col(i) = R.col(i + 1);
    }
    ids[static_cast<std::size_t>(iq) - 1] = ids[static_cast<std::size_t>(iq)];
    u(iq - 1) = u(iq);
    ids[static_cast<std::size_t>(iq)] = 0;
    u(iq) = 0.0;
    R.col(iq - 1).head(iq).setZero();
    --iq;
    if (iq == 0) return;
    for (int j = qq; j < iq; ++j) {
      double cc = R(j, j);
      double ss = R(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq; ++k) {
        const double t1 = R(j, k);
        const double t2 = R(j + 1, k);
        R(j, k) = t1 * cc + t2 * ss;
        R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = J(k, j);
        const double t2 = J(k, j + 1);
        J(k, j) = t1 * cc + t2 * ss;
        J(k, j + 1) = xny * (J(k, j) + t1) - t2;
      }
    }
  }

  // d = Jᵀ a for a sparse constraint row.
  template <typename Row>
  void project(const Row& row, Eigen::VectorXd& d) const {
    d.setZero();
    for (typename Row::InnerIterator it(row, 0); it; ++it) {
      d.noalias() += it.value() * J.row(it.index()).transpose();
    }
  }
};

double row_dot(const SparseRows& m, Eigen::Index r, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (SparseRows::InnerIterator it(m, r); it; ++it) s += it.value() * x(it.index());
  return s;
}

}  // namespace

QpResult solve_qp(const QpProblem& p, const QpOptions& options) {
  const Eigen::Index n = p.hessian.rows();
  const Eigen::Index me = p.eq.rows();
  const Eigen::Index mi = p.ineq.rows();
  if (p.hessian.cols() != n || p.linear.size() != n || (me > 0 && p.eq.cols() != n) ||
      (mi > 0 && p.ineq.cols() != n) || p.eq_rhs.size() != me || p.ineq_rhs.size() != mi) {
    throw ContractError("solve_qp: inconsistent problem dimensions");
  }
  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : static_cast<int>(20 * (n + mi + me) + 100);

  Eigen::LLT<Eigen::MatrixXd> llt(p.hessian);
  if (llt.info() != Eigen::Success) {
    throw SolverFailure("solve_qp: Hessian is not positive definite", Eigen::VectorXd::Zero(n), kInf);
  }

  ActiveSet as(n);
  as.J = Eigen::MatrixXd::Identity(n, n);
  llt.matrixU().solveInPlace(as.J);  // J = L⁻ᵀ

  Eigen::VectorXd x = llt.solve(-p.linear);
  Eigen::VectorXd d(n);
  Eigen::VectorXd z(n);
  Eigen::VectorXd r(n + 1);

  auto compute_step = [&](int iq) {
    z.noalias() = as.J.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0) {
      r.head(iq) = as.R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
    }
  };
  auto dependent = [&](int iq) { return d.tail(n - iq).norm() <= 1e-10 * std::max(d.norm(), 1e-300); };

  for (Eigen::Index i = 0; i < me; ++i) {
    as.project(p.eq.row(i), d);
    compute_step(as.iq);
    if (dependent(as.iq)) {
      // A dependent equality is either redundant or contradictory.
      const double resid = row_dot(p.eq, i, x) - p.eq_rhs(i);
      if (std::abs(resid) > 1e-9 * (1.0 + std::abs(p.eq_rhs(i)))) {
        throw ScenarioInfeasible("solve_qp: inconsistent equality constraints", {});
      }
      continue;
    }
    const double t = (p.eq_rhs(i) - row_dot(p.eq, i, x)) / d.tail(n - as.iq).squaredNorm();
    x += t * z;
    as.u(as.iq) = t;
    if (as.iq > 0) as.u.head(as.iq) -= t * r.head(as.iq);
    as.ids[static_cast<std::size_t>(as.iq)] = -static_cast<int>(i) - 1;
    as.add(d);
  }
  const int eq_slots = as.iq;

  Eigen::VectorXd row_norm(mi);
  for (Eigen::Index i = 0; i < mi; ++i) row_norm(i) = std::max(p.ineq.row(i).norm(), 1e-300);

  std::vector<char> is_active(static_cast<std::size_t>(mi), 0);
  std::vector<char> excluded(static_cast<std::size_t>(mi), 0);
  Eigen::VectorXd slack(mi);

  int iter = 0;
  for (;;) {
    if (++iter > max_iter) {
      throw SolverFailure("solve_qp: iteration cap reached", x, kInf);
    }
    if (mi == 0) break;
    slack.noalias() = p.ineq * x - p.ineq_rhs;
    const double tol = options.feasibility_tol * (1.0 + x.lpNorm<Eigen::Infinity>());
    Eigen::Index ip = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (is_active[static_cast<std::size_t>(i)] || excluded[static_cast<std::size_t>(i)]) continue;
      const double v = slack(i) / row_norm(i);
      if (v < worst) {
        worst = v;
        ip = i;
      }
    }
    if (ip < 0) break;

    const Eigen::VectorXd x_old = x;
    const Eigen::VectorXd u_old = as.u;
    const std::vector<int> ids_old = as.ids;
    const int iq_old = as.iq;

    const auto row = p.ineq.row(ip);
    as.u(as.iq) = 0.0;
    as.ids[static_cast<std::size_t>(as.iq)] = static_cast<int>(ip);
    double s_ip = slack(ip);

    for (;;) {
      if (++iter > max_iter) throw SolverFailure("solve_qp: iteration cap reached", x, kInf);
      as.project(row, d);
      compute_step(as.iq);

      // Largest step before an active inequality multiplier hits zero.
      double t1 = kInf;
      int drop = -1;
      for (int k = eq_slots; k < as.iq; ++k) {
        if (r(k) > 0.0) {
          const double ratio = as.u(k) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = as.ids[static_cast<std::size_t>(k)];
          }
        }
      }
      const bool dep = dependent(as.iq);
      const double t2 = dep ? kInf : -s_ip / d.tail(n - as.iq).squaredNorm();
      const double t = std::min(t1, t2);
      if (t == kInf) {
        throw ScenarioInfeasible("solve_qp: constraints are infeasible", {});
      }
      if (t2 == kInf) {
        // Pure dual step.
        if (as.iq > 0) as.u.head(as.iq) -= t * r.head(as.iq);
        as.u(as.iq) += t;
        is_active[static_cast<std::size_t>(drop)] = 0;
        as.remove(drop, eq_slots);
        continue;
      }
      x += t * z;
      if (as.iq > 0) as.u.head(as.iq) -= t * r.head(as.iq);
      as.u(as.iq) += t;
      if (t == t2) {
        as.add(d);
        if (std::abs(as.R(as.iq - 1, as.iq - 1)) <= std::numeric_limits<double>::epsilon() * as.r_norm) {
          // Numerically dependent after all: restore and skip this row.
          x = x_old;
          as.u = u_old;
          as.ids = ids_old;
          as.iq = iq_old;
          excluded[static_cast<std::size_t>(ip)] = 1;
          // Rebuild the factorization from scratch for the restored set.
          as.J = Eigen::MatrixXd::Identity(n, n);
          llt.matrixU().solveInPlace(as.J);
          as.R.setZero();
          const auto kept = as.ids;
          const int kept_iq = as.iq;
          as.iq = 0;
          for (int k = 0; k < kept_iq; ++k) {
            const int id = kept[static_cast<std::size_t>(k)];
            if (id < 0) {
              as.project(p.eq.row(-id - 1), d);
            } else {
              as.project(p.ineq.row(id), d);
            }
            as.add(d);
          }
          as.ids = kept;
          break;
        }
        is_active[static_cast<std::size_t>(ip)] = 1;
        break;
      }
      // Partial step: drop the blocking constraint and retry the same row.
      is_active[static_cast<std::size_t>(drop)] = 0;
      as.remove(drop, eq_slots);
      s_ip = row_dot(p.ineq, ip, x) - p.ineq_rhs(ip);
    }
  }

  QpResult out;
  out.x = x;
  out.eq_multipliers = Eigen::VectorXd::Zero(me);
  out.ineq_multipliers = Eigen::VectorXd::Zero(mi);
  for (int k = 0; k < as.iq; ++k) {
    const int id = as.ids[static_cast<std::size_t>(k)];
    if (id < 0) {
      out.eq_multipliers(-id - 1) = as.u(k);
    } else {
      out.ineq_multipliers(id) = as.u(k);
      out.active_ineq.push_back(id);
    }
  }
  std::sort(out.active_ineq.begin(), out.active_ineq.end());
  out.objective = 0.5 * x.dot(p.hessian * x) + p.linear.dot(x);
  out.iterations = iter;
  return out;
}

}  // namespace evcoord
