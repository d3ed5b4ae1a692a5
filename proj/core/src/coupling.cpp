#include "evcoord/coupling.hpp"

#include "evcoord/errors.hpp"

namespace evcoord {

VoltageLimits VoltageLimits::from_band(int supply_points, double v0, double band_percent) {
  if (!(band_percent > 0.0 && band_percent < 100.0)) {
    throw ConfigError("voltage band must lie in (0, 100) percent");
  }
  const double lo = (1.0 - band_percent / 100.0);
  const double hi = (1.0 + band_percent / 100.0);
  return {Eigen::VectorXd::Constant(supply_points, lo * lo * v0),
          Eigen::VectorXd::Constant(supply_points, hi * hi * v0)};
}

const char* row_kind_name(RowKind kind) noexcept {
  switch (kind) {
    case RowKind::thermal: return "thermal";
    case RowKind::upper_voltage: return "upper_voltage";
    case RowKind::lower_voltage: return "lower_voltage";
  }
  return "?";
}

CouplingSystem CouplingSystem::uncoupled(int horizon, int supply_points, int customers) {
  CouplingSystem c;
  c.horizon_ = horizon;
  c.supply_points_ = supply_points;
  c.customers_ = customers;
  c.network_aware_ = false;
  c.thermal_map_ = Eigen::MatrixXd::Zero(horizon, horizon);
  c.sensitivity_ = Eigen::MatrixXd::Zero(supply_points, customers);
  c.headroom_.resize(0);
  c.row_scale_.resize(0);
  return c;
}

RowInfo CouplingSystem::row_info(int row) const {
  if (row < 0 || row >= rows()) throw InvalidQuery("coupling row out of range");
  if (row < horizon_) return {RowKind::thermal, -1, row + 1};
  const int block = horizon_ * supply_points_;
  int r = row - horizon_;
  const RowKind kind = r < block ? RowKind::upper_voltage : RowKind::lower_voltage;
  if (r >= block) r -= block;
  return {kind, r % supply_points_, r / supply_points_ + 1};
}

std::string CouplingSystem::row_label(int row) const {
  const auto info = row_info(row);
  std::string s = row_kind_name(info.kind);
  if (info.supply_point >= 0) s += "[sp " + std::to_string(info.supply_point) + "]";
  return s + "@t=" + std::to_string(info.step);
}

Eigen::VectorXd CouplingSystem::apply(int n, const Eigen::VectorXd& x) const {
  if (!network_aware_) return Eigen::VectorXd(0);
  if (x.size() != horizon_) throw ContractError("coupling apply: profile length mismatch");
  Eigen::VectorXd out(rows());
  out.head(horizon_).noalias() = thermal_map_ * x;
  const auto d = sensitivity_.col(n);
  const int block = horizon_ * supply_points_;
  for (int t = 0; t < horizon_; ++t) {
    out.segment(horizon_ + t * supply_points_, supply_points_) = d * x(t);
    out.segment(horizon_ + block + t * supply_points_, supply_points_) = -d * x(t);
  }
  return out;
}

Eigen::VectorXd CouplingSystem::apply_transpose(int n, const Eigen::VectorXd& y) const {
  if (!network_aware_) return Eigen::VectorXd::Zero(horizon_);
  if (y.size() != rows()) throw ContractError("coupling apply_transpose: length mismatch");
  Eigen::VectorXd out = thermal_map_.transpose() * y.head(horizon_);
  const auto d = sensitivity_.col(n);
  const int block = horizon_ * supply_points_;
  for (int t = 0; t < horizon_; ++t) {
    out(t) += d.dot(y.segment(horizon_ + t * supply_points_, supply_points_)) -
              d.dot(y.segment(horizon_ + block + t * supply_points_, supply_points_));
  }
  return out;
}

Eigen::VectorXd CouplingSystem::fleet_load(const Eigen::MatrixXd& x_fleet) const {
  if (x_fleet.rows() != customers_ || x_fleet.cols() != horizon_) {
    throw ContractError("fleet matrix must be N×T");
  }
  if (!network_aware_) return Eigen::VectorXd(0);
  Eigen::VectorXd out(rows());
  const Eigen::VectorXd total = x_fleet.colwise().sum().transpose();
  out.head(horizon_).noalias() = thermal_map_ * total;
  const Eigen::MatrixXd dv = sensitivity_ * x_fleet;  // ϰ×T
  const Eigen::Map<const Eigen::VectorXd> stacked(dv.data(), dv.size());
  out.segment(horizon_, dv.size()) = stacked;
  out.tail(dv.size()) = -stacked;
  return out;
}

Eigen::MatrixXd CouplingSystem::dense(int n) const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rows(), horizon_);
  if (!network_aware_) return g;
  g.topRows(horizon_) = thermal_map_;
  const auto d = sensitivity_.col(n);
  const int block = horizon_ * supply_points_;
  for (int t = 0; t < horizon_; ++t) {
    g.block(horizon_ + t * supply_points_, t, supply_points_, 1) = d;
    g.block(horizon_ + block + t * supply_points_, t, supply_points_, 1) = -d;
  }
  return g;
}

CouplingSystem CouplingSystem::equilibrated() const {
  CouplingSystem c = *this;
  if (!network_aware_) return c;
  const int block = horizon_ * supply_points_;
  for (int t = 0; t < horizon_; ++t) {
    const double m = thermal_map_.row(t).cwiseAbs().maxCoeff();
    const double f = m > 0.0 ? 1.0 / m : 1.0;
    c.thermal_map_.row(t) *= f;
    c.headroom_[t] *= f;
    c.row_scale_[t] *= f;
  }
  for (int k = 0; k < supply_points_; ++k) {
    const double m = customers_ > 0 ? sensitivity_.row(k).cwiseAbs().maxCoeff() : 0.0;
    const double f = m > 0.0 ? 1.0 / m : 1.0;
    c.sensitivity_.row(k) *= f;
    for (int t = 0; t < horizon_; ++t) {
      for (int off : {horizon_ + t * supply_points_ + k, horizon_ + block + t * supply_points_ + k}) {
        c.headroom_[off] *= f;
        c.row_scale_[off] *= f;
      }
    }
  }
  return c;
}

CouplingSystem assemble(const SensitivityMatrices& sens, const BaselineSeries& baseline,
                        const Eigen::VectorXd& thermal_headroom, const ThermalResponse& thermal,
                        const VoltageLimits& limits, const std::vector<SupplyPoint>& supply_points) {
  const int T = baseline.horizon();
  const auto n_sp = static_cast<int>(sens.D.rows());
  if (thermal.horizon() != T || thermal_headroom.size() != T) {
    throw ContractError("thermal data horizon does not match the baseline");
  }
  if (baseline.v_squared.rows() != n_sp || limits.lower.size() != n_sp || limits.upper.size() != n_sp) {
    throw ContractError("voltage data does not match the supply points");
  }
  if (((limits.lower.array() <= 0.0) || (limits.lower.array() >= limits.upper.array())).any()) {
    throw ConfigError("voltage limits need 0 < lower < upper");
  }

  CouplingSystem c;
  c.horizon_ = T;
  c.supply_points_ = n_sp;
  c.customers_ = static_cast<int>(sens.D.cols());
  c.network_aware_ = true;
  c.thermal_map_ = thermal.current_map;
  c.sensitivity_ = sens.D;
  c.headroom_.resize(c.rows());
  c.row_scale_ = Eigen::VectorXd::Ones(c.rows());
  c.headroom_.head(T) = thermal_headroom;
  const int block = T * n_sp;
  for (int t = 0; t < T; ++t) {
    c.headroom_.segment(T + t * n_sp, n_sp) = limits.upper - baseline.v_squared.col(t);
    c.headroom_.segment(T + block + t * n_sp, n_sp) = baseline.v_squared.col(t) - limits.lower;
  }

  std::vector<std::string> bad;
  for (int r = 0; r < c.rows(); ++r) {
    if (c.headroom_(r) < 0.0) {
      auto label = c.row_label(r);
      const auto info = c.row_info(r);
      if (info.supply_point >= 0 && static_cast<std::size_t>(info.supply_point) < supply_points.size()) {
        label += " (" + supply_points[static_cast<std::size_t>(info.supply_point)].label() + ")";
      }
      bad.push_back(label);
    }
  }
  if (!bad.empty()) {
    throw ScenarioInfeasible("baseline load violates " + std::to_string(bad.size()) +
                                 " network limit row(s) before any EV acts",
                             std::move(bad));
  }
  return c;
}

std::vector<Violation> violation_report(const CouplingSystem& coupling, const Eigen::MatrixXd& x_fleet,
                                        double tol) {
  std::vector<Violation> out;
  if (!coupling.network_aware()) return out;
  const Eigen::VectorXd slack = coupling.headroom() - coupling.fleet_load(x_fleet);
  for (int r = 0; r < coupling.rows(); ++r) {
    if (slack(r) < -tol) {
      const auto info = coupling.row_info(r);
      out.push_back({info.kind, info.supply_point, info.step, slack(r)});
    }
  }
  return out;
}

}  // namespace evcoord
