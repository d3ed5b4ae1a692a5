#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "evcoord/feeder.hpp"
#include "evcoord/fleet.hpp"

namespace testing {

inline std::filesystem::path scenario_file(const std::string& name) {
  return std::filesystem::path(EVCOORD_SCENARIO_DIR) / name / "scenario.json";
}

inline evcoord::LineSegment line(int from, int to, const std::string& phases,
                                 std::map<std::string, std::complex<double>> z) {
  evcoord::LineSegment l;
  l.from_node = from;
  l.to_node = to;
  l.phases = evcoord::parse_phases(phases);
  for (const auto& [key, value] : z) {
    l.impedance[{evcoord::parse_phase(key[0]), evcoord::parse_phase(key[1])}] = value;
  }
  return l;
}

inline evcoord::EvSpec ev(int arrival, int departure, double soc0, double soc_target, double x_max = 7.0,
                          double capacity = 40.0, double kappa = 0.01) {
  evcoord::EvSpec s;
  s.id = "ev";
  s.supply_point = {1, evcoord::Phase::a};
  s.arrival = arrival;
  s.departure = departure;
  s.capacity_kwh = capacity;
  s.soc0 = soc0;
  s.soc_target = soc_target;
  s.soc_min = 0.0;
  s.soc_max = 1.0;
  s.efficiency = 1.0;
  s.x_min_kw = -x_max;
  s.x_max_kw = x_max;
  s.kappa = kappa;
  return s;
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace testing
