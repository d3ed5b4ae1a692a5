#pragma once

#include <complex>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace evcoord {

enum class Phase : std::uint8_t { a = 0, b = 1, c = 2 };

/// Phase index [[a]]=0, [[b]]=1, [[c]]=2.
constexpr int phase_index(Phase p) noexcept { return static_cast<int>(p); }

char phase_char(Phase p) noexcept;
Phase parse_phase(char c);
/// Parses "abc", "b", "ac", ... into phases in a,b,c order. Throws ModelError.
std::vector<Phase> parse_phases(std::string_view s);

/// Phase `phase` at network node `node`.
struct SupplyPoint {
  int node = 0;
  Phase phase = Phase::a;

  auto operator<=>(const SupplyPoint&) const = default;

  /// "node:phase", e.g. "3:b".
  std::string label() const;
  static SupplyPoint parse(std::string_view label);
};

/// One line of the radial feeder. Impedances are in per unit.
struct LineSegment {
  int from_node = 0;
  int to_node = 0;
  std::vector<Phase> phases;
  std::map<std::pair<Phase, Phase>, std::complex<double>> impedance;

  bool has_phase(Phase p) const;
  /// Self or mutual impedance; looked up in both key orders, zero when absent.
  std::complex<double> z(Phase p, Phase q) const;
};

/// Multiphase radial feeder with node 0 as the feeder head.
///
/// Supply points are ordered by node id ascending and by phase a,b,c within a
/// node; every vector and matrix indexed by supply point uses that order.
/// Customer n is attached to exactly one supply point.
class FeederModel {
 public:
  FeederModel(std::vector<int> nodes, std::vector<LineSegment> lines,
              std::vector<SupplyPoint> customers, double v0, double s_base_kva = 1.0);

  const std::vector<int>& nodes() const noexcept { return nodes_; }
  const std::vector<LineSegment>& lines() const noexcept { return lines_; }
  const std::vector<SupplyPoint>& supply_points() const noexcept { return supply_points_; }
  const std::vector<SupplyPoint>& customers() const noexcept { return customers_; }

  int num_supply_points() const noexcept { return static_cast<int>(supply_points_.size()); }
  int num_customers() const noexcept { return static_cast<int>(customers_.size()); }

  /// Squared nominal voltage magnitude at the feeder head (p.u.^2).
  double v0() const noexcept { return v0_; }
  double s_base_kva() const noexcept { return s_base_kva_; }

  bool has_node(int node) const;
  const std::vector<Phase>& phases_at(int node) const;

  /// Row index of a supply point. Throws InvalidQuery when it does not exist.
  int supply_index(const SupplyPoint& sp) const;
  /// Supply-point row of customer n.
  int customer_row(int n) const { return customer_rows_.at(static_cast<std::size_t>(n)); }

  /// Dense ϰ×N 0/1 incidence matrix Υ.
  Eigen::MatrixXd incidence() const;

  /// Line indices on the path from the root to `node`.
  const std::vector<int>& root_path(int node) const;

  /// Sum of z^{φφ̂} over the lines shared by the root paths of k and k̂.
  std::complex<double> path_impedance(int k, int k_hat, Phase phi, Phase phi_hat) const;

 private:
  std::vector<int> nodes_;
  std::vector<LineSegment> lines_;
  std::vector<SupplyPoint> customers_;
  double v0_;
  double s_base_kva_;

  std::map<int, std::size_t> node_slot_;
  std::vector<std::vector<Phase>> node_phases_;
  std::vector<std::vector<int>> root_paths_;
  std::vector<SupplyPoint> supply_points_;
  std::vector<int> customer_rows_;
};

/// Linearized voltage sensitivities.
///
/// R and X are in per unit. D maps EV real power in kW to squared voltage in
/// p.u.^2 (D = -RΥ / S_base).
struct SensitivityMatrices {
  Eigen::MatrixXd R;
  Eigen::MatrixXd X;
  Eigen::MatrixXd D;
  double kw_to_pu = 1.0;

  auto customer_column(int n) const { return D.col(n); }
};

SensitivityMatrices build_sensitivity(const FeederModel& feeder);

/// Non-EV load per supply point and step plus the squared voltages it
/// produces on its own: Ṽ(t) = V⁰ - R P̃(t) - X Q̃(t).
struct BaselineSeries {
  Eigen::MatrixXd p_kw;       // ϰ×T
  Eigen::MatrixXd q_kvar;     // ϰ×T
  Eigen::MatrixXd v_squared;  // ϰ×T

  int horizon() const noexcept { return static_cast<int>(p_kw.cols()); }

  static BaselineSeries from_loads(const FeederModel& feeder, const SensitivityMatrices& sens,
                                   Eigen::MatrixXd p_kw, Eigen::MatrixXd q_kvar);
};

/// Squared voltages with the fleet charging X_fleet (N×T, kW). Column t of the
/// result is V(t); stacking the columns gives the ϰT horizon vector.
Eigen::MatrixXd voltage_profile(const SensitivityMatrices& sens, const BaselineSeries& baseline,
                                const Eigen::MatrixXd& x_fleet);

}  // namespace evcoord
