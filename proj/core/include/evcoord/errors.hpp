#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace evcoord {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed network description (non-radial, dangling phases, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A query that names a node or phase the model does not have.
class InvalidQuery : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions that do not agree with the model.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Thermal parameters outside the stable/real-valued regime.
class ThermalParamError : public Error {
 public:
  using Error::Error;
};

/// An EV whose battery constraints admit no charge profile.
class InfeasibleSpec : public Error {
 public:
  InfeasibleSpec(std::string ev_id, std::string constraint, const std::string& detail)
      : Error("EV '" + ev_id + "' infeasible: " + constraint + " (" + detail + ")"),
        ev_id_(std::move(ev_id)),
        constraint_(std::move(constraint)) {}

  const std::string& ev_id() const noexcept { return ev_id_; }
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string ev_id_;
  std::string constraint_;
};

/// The network limits cannot be met (baseline already violates them, or the
/// coupled problem has no solution).
class ScenarioInfeasible : public Error {
 public:
  ScenarioInfeasible(const std::string& what, std::vector<std::string> rows)
      : Error(what), rows_(std::move(rows)) {}

  const std::vector<std::string>& violated_rows() const noexcept { return rows_; }

 private:
  std::vector<std::string> rows_;
};

/// An iterative solver hit its iteration cap. Carries the best iterate.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, Eigen::VectorXd best_iterate, double residual)
      : Error(what), best_(std::move(best_iterate)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

/// Invalid run configuration (disconnected graph, bad probabilities, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace evcoord
