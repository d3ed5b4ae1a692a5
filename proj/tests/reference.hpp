#pragma once

// Independent oracles shared by the agent, runner and acceptance tests.

#include <vector>

#include "evcoord/dense_qp.hpp"
#include "evcoord/localqp.hpp"

namespace testing {

// Agent subproblem solved as one dense QP over (x, s) with the full
// T-dimensional polytope description, no slack elimination.
inline Eigen::VectorXd joint_local_solve(const evcoord::LocalQp& qp, Eigen::VectorXd* s_out = nullptr) {
  const auto& poly = *qp.polytope;
  const int T = poly.horizon();
  const int m = qp.coupling->rows();
  const Eigen::MatrixXd g = qp.coupling->dense(qp.agent);
  evcoord::QpProblem p;
  p.hessian = Eigen::MatrixXd::Zero(T + m, T + m);
  p.hessian.topLeftCorner(T, T) = 2.0 * qp.kappa * Eigen::MatrixXd::Identity(T, T) + 2.0 * qp.weight * g.transpose() * g;
  p.hessian.topRightCorner(T, m) = 2.0 * qp.weight * g.transpose();
  p.hessian.bottomLeftCorner(m, T) = 2.0 * qp.weight * g;
  p.hessian.bottomRightCorner(m, m) = 2.0 * qp.weight * Eigen::MatrixXd::Identity(m, m);
  p.linear.resize(T + m);
  p.linear << qp.linear - 2.0 * qp.weight * g.transpose() * qp.target, -2.0 * qp.weight * qp.target;
  Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(poly.a_eq.rows(), T + m);
  eq.leftCols(T) = poly.a_eq;
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(poly.a_ineq.rows() + m, T + m);
  in.topLeftCorner(poly.a_ineq.rows(), T) = poly.a_ineq;
  in.bottomRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd in_rhs = Eigen::VectorXd::Zero(in.rows());
  in_rhs.head(poly.b_ineq.size()) = poly.b_ineq;
  p.eq = eq.sparseView();
  p.eq_rhs = poly.b_eq;
  p.ineq = in.sparseView();
  p.ineq_rhs = in_rhs;
  evcoord::QpOptions opt;
  opt.feasibility_tol = 1e-10;
  const auto r = evcoord::solve_qp(p, opt);
  if (s_out) *s_out = r.x.tail(m);
  return r.x.head(T);
}

}  // namespace testing

#include "evcoord/commnet.hpp"
#include "evcoord/scenario.hpp"

namespace testing {

// Algorithm 1 written out directly on plain vectors. Agent n keeps, per
// neighbour, the λ it last heard and its own λ at that exchange; a silent link
// leaves both alone. Local problems go through joint_local_solve in the
// expanded scaling.
struct ReferenceAdmm {
  const evcoord::Scenario* sc;
  const evcoord::CouplingSystem* c;
  const evcoord::CommGraph* g;
  double rho;
  std::vector<Eigen::VectorXd> lambda, nu, x, s;
  std::vector<std::map<int, std::pair<Eigen::VectorXd, Eigen::VectorXd>>> edge;  // m -> (own, heard)

  ReferenceAdmm(const evcoord::Scenario& scenario, const evcoord::CouplingSystem& coupling,
                const evcoord::CommGraph& graph, double penalty)
      : sc(&scenario), c(&coupling), g(&graph), rho(penalty) {
    const int n = graph.num_agents();
    const int m = coupling.rows();
    for (int i = 0; i < n; ++i) {
      lambda.push_back(Eigen::VectorXd::Zero(m));
      nu.push_back(Eigen::VectorXd::Zero(m));
      x.push_back(scenario.polytopes[static_cast<std::size_t>(i)].feasible_point);
      s.push_back(Eigen::VectorXd::Zero(m));
      std::map<int, std::pair<Eigen::VectorXd, Eigen::VectorXd>> e;
      for (int nb : graph.neighbors(i)) e[nb] = {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
      edge.push_back(e);
    }
  }

  void round(const std::vector<char>& active, const std::vector<char>& links) {
    const int n = g->num_agents();
    const auto published = lambda;
    const double agents = static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      const auto k = static_cast<std::size_t>(i);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(c->rows());
      for (auto& [m, pair] : edge[k]) {
        if (links[static_cast<std::size_t>(g->edge_index(i, m))]) {
          nu[k] += rho * (published[k] - published[static_cast<std::size_t>(m)]);
          pair = {published[k], published[static_cast<std::size_t>(m)]};
        }
        sum += pair.first + pair.second;
      }
      const int deg = g->degree(i);
      evcoord::LocalQp qp;
      qp.polytope = &sc->polytopes[k];
      qp.coupling = c;
      qp.agent = i;
      qp.kappa = sc->fleet[k].kappa;
      qp.linear = sc->config.step_hours * sc->price;
      qp.weight = 1.0 / (4.0 * rho * deg);
      qp.target = c->headroom() / agents + nu[k] - rho * sum;
      x[k] = joint_local_solve(qp, &s[k]);
      const Eigen::VectorXd xi_u = c->apply(i, x[k]) + s[k];
      lambda[k] = (sum - nu[k] / rho + xi_u / rho - c->headroom() / (agents * rho)) / (2.0 * deg);
    }
  }

  Eigen::MatrixXd fleet() const {
    Eigen::MatrixXd out(static_cast<long>(x.size()), x.front().size());
    for (std::size_t i = 0; i < x.size(); ++i) out.row(static_cast<long>(i)) = x[i].transpose();
    return out;
  }
};

}  // namespace testing
