#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evcoord/feeder.hpp"
#include "evcoord/thermal.hpp"

namespace evcoord {

/// Squared-voltage bounds per supply point (p.u.²).
struct VoltageLimits {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  /// Band of ±band_percent on the voltage magnitude around √v0, squared.
  static VoltageLimits from_band(int supply_points, double v0, double band_percent);
};

enum class RowKind { thermal, upper_voltage, lower_voltage };

const char* row_kind_name(RowKind kind) noexcept;

struct RowInfo {
  RowKind kind;
  int supply_point;  // -1 for thermal rows
  int step;          // 1-based
};

/// The coupled network constraint Σₙ Γₙ xₙ ≤ w.
///
/// Row layout: T thermal rows, then ϰT upper-voltage rows, then ϰT
/// lower-voltage rows; inside a voltage block the rows for step t occupy
/// [tϰ, (t+1)ϰ). Γₙ = [Ξ; D̄ₙ; -D̄ₙ] with D̄ₙ = ⊕ᵀ Dₙ, stored implicitly.
/// A price-only system has zero rows.
class CouplingSystem {
 public:
  CouplingSystem() = default;

  static CouplingSystem uncoupled(int horizon, int supply_points, int customers);

  int horizon() const noexcept { return horizon_; }
  int supply_points() const noexcept { return supply_points_; }
  int customers() const noexcept { return customers_; }
  bool network_aware() const noexcept { return network_aware_; }
  int rows() const noexcept { return network_aware_ ? horizon_ * (1 + 2 * supply_points_) : 0; }

  const Eigen::MatrixXd& thermal_map() const noexcept { return thermal_map_; }
  const Eigen::MatrixXd& voltage_sensitivity() const noexcept { return sensitivity_; }
  const Eigen::VectorXd& headroom() const noexcept { return headroom_; }

  RowInfo row_info(int row) const;
  std::string row_label(int row) const;

  int upper_row(int step0, int sp) const noexcept { return horizon_ + step0 * supply_points_ + sp; }
  int lower_row(int step0, int sp) const noexcept {
    return horizon_ + horizon_ * supply_points_ + step0 * supply_points_ + sp;
  }

  /// Γₙ x.
  Eigen::VectorXd apply(int n, const Eigen::VectorXd& x) const;
  /// Γₙᵀ y.
  Eigen::VectorXd apply_transpose(int n, const Eigen::VectorXd& y) const;
  /// Σₙ Γₙ xₙ for the N×T fleet matrix.
  Eigen::VectorXd fleet_load(const Eigen::MatrixXd& x_fleet) const;
  /// Γₙ as a dense (T+2ϰT)×T matrix.
  Eigen::MatrixXd dense(int n) const;

  /// The same constraint set with every row divided by its largest
  /// coefficient over all customers. Thermal rows are scaled one by one,
  /// voltage rows per supply point, so the block structure is kept.
  CouplingSystem equilibrated() const;
  /// Factor each row was multiplied by relative to the assembled system.
  const Eigen::VectorXd& row_scale() const noexcept { return row_scale_; }

  friend CouplingSystem assemble(const SensitivityMatrices&, const BaselineSeries&,
                                 const Eigen::VectorXd&, const ThermalResponse&, const VoltageLimits&,
                                 const std::vector<SupplyPoint>&);

 private:
  int horizon_ = 0;
  int supply_points_ = 0;
  int customers_ = 0;
  bool network_aware_ = false;
  Eigen::MatrixXd thermal_map_;
  Eigen::MatrixXd sensitivity_;
  Eigen::VectorXd headroom_;
  Eigen::VectorXd row_scale_;
};

/// Stacks the thermal headroom 𝔍 over 𝔚 = [V̄ - Ṽ; -V̲ + Ṽ].
/// Throws ScenarioInfeasible listing every negative headroom row.
CouplingSystem assemble(const SensitivityMatrices& sens, const BaselineSeries& baseline,
                        const Eigen::VectorXd& thermal_headroom, const ThermalResponse& thermal,
                        const VoltageLimits& limits,
                        const std::vector<SupplyPoint>& supply_points = {});

struct Violation {
  RowKind kind;
  int supply_point;  // index into the supply-point order, -1 for thermal
  int step;          // 1-based
  double slack;      // w - ΣΓx, negative
};

/// Rows of Σₙ Γₙ xₙ ≤ w whose slack is below -tol.
std::vector<Violation> violation_report(const CouplingSystem& coupling, const Eigen::MatrixXd& x_fleet,
                                        double tol = 0.0);

}  // namespace evcoord
