#include "evcoord/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evcoord/errors.hpp"
#include "evcoord/io.hpp"

namespace evcoord {

namespace fs = std::filesystem;
using nlohmann::json;

CaseKind parse_case(std::string_view text) {
  if (text == "price" || text == "price_based") return CaseKind::price_based;
  if (text == "network" || text == "network_aware") return CaseKind::network_aware;
  throw ConfigError("unknown case '" + std::string(text) + "' (expected price or network)");
}

const char* case_name(CaseKind kind) noexcept {
  return kind == CaseKind::price_based ? "price_based" : "network_aware";
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return require(obj, key, where).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return get<T>(obj, key, where);
}

fs::path existing(const fs::path& base, const std::string& rel, const char* what) {
  fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " file not found: " + p.string());
  return p;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

int time_index(const CsvTable& t, std::size_t row, int horizon, const std::string& file) {
  const long idx = t.integer(row, "time_index");
  if (idx < 1 || idx > horizon)
    throw ConfigError(file + ": time_index " + std::to_string(idx) + " outside 1.." + std::to_string(horizon));
  return static_cast<int>(idx) - 1;
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  const json j = parse_json(json_text, "scenario");
  ScenarioConfig c;
  c.base_dir = base_dir;
  c.source_json = json_text;
  c.name = get_or<std::string>(j, "name", "scenario", "scenario");
  c.horizon = get<int>(j, "horizon", "scenario");
  c.step_hours = get<double>(j, "step_hours", "scenario");
  if (c.horizon < 1) throw ConfigError("scenario.horizon must be positive");
  if (!(c.step_hours > 0.0)) throw ConfigError("scenario.step_hours must be positive");

  const auto& files = require(j, "files", "scenario");
  c.feeder_file = existing(base_dir, get<std::string>(files, "feeder", "files"), "feeder");
  c.fleet_file = existing(base_dir, get<std::string>(files, "fleet", "files"), "fleet");
  c.price_file = existing(base_dir, get<std::string>(files, "price", "files"), "price");
  c.baseline_file = existing(base_dir, get<std::string>(files, "baseline", "files"), "baseline");
  c.disturbance_file = existing(base_dir, get<std::string>(files, "disturbance", "files"), "disturbance");
  if (files.contains("graph"))
    c.graph.edge_file = existing(base_dir, get<std::string>(files, "graph", "files"), "graph");

  const auto& th = require(j, "thermal", "scenario");
  c.thermal.heat_capacity = get<double>(th, "heat_capacity_J_per_K", "thermal");
  c.thermal.heat_resistance = get<double>(th, "heat_resistance_K_per_W", "thermal");
  c.thermal.coil_resistance = get<double>(th, "coil_resistance_ohm", "thermal");
  c.thermal.theta_eq = get<double>(th, "theta_eq_K", "thermal");
  c.thermal.ambient_eq = get<double>(th, "ambient_eq_K", "thermal");
  c.thermal.theta0 = get<double>(th, "theta0_K", "thermal");
  c.thermal.rms_voltage = get_or<double>(th, "rms_voltage_V", 240.0, "thermal");
  c.thermal.watts_per_kw = get_or<double>(th, "watts_per_kw", 1000.0, "thermal");
  c.thermal.step_hours = c.step_hours;

  const auto& lim = require(j, "limits", "scenario");
  c.voltage_band_percent = get<double>(lim, "voltage_band_percent", "limits");
  c.thermal.theta_max = get<double>(lim, "theta_max_K", "limits");
  if (!(c.voltage_band_percent > 0.0 && c.voltage_band_percent < 100.0))
    throw ConfigError("limits.voltage_band_percent must be in (0, 100)");

  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    c.graph.n_agents = get_or<int>(g, "n_agents", 0, "graph");
    c.graph.edge_prob = get_or<double>(g, "edge_prob", 0.5, "graph");
    c.graph.seed = get_or<std::uint64_t>(g, "seed", 1, "graph");
  }
  if (j.contains("admm")) {
    const auto& a = j.at("admm");
    c.admm.rho = get_or<double>(a, "rho", 1.0, "admm");
    c.admm.max_iter = get_or<int>(a, "max_iter", 10000, "admm");
    c.admm.eps_dual = get_or<double>(a, "eps_dual", 1e-6, "admm");
    c.admm.eps_primal = get_or<double>(a, "eps_primal", 1e-6, "admm");
    c.admm.threads = get_or<int>(a, "threads", 1, "admm");
    c.admm.stop_window = get_or<int>(a, "stop_window", 10, "admm");
    c.admm.equilibrate = get_or<bool>(a, "equilibrate", true, "admm");
    const auto stale = get_or<std::string>(a, "stale_policy", "edge_state", "admm");
    if (stale == "edge_state") {
      c.admm.stale = StalePolicy::edge_state;
    } else if (stale == "last_value") {
      c.admm.stale = StalePolicy::last_value;
    } else {
      throw ConfigError("admm.stale_policy must be edge_state or last_value");
    }
    const auto scaling = get_or<std::string>(a, "proximal_scaling", "as_printed", "admm");
    if (scaling == "as_printed") {
      c.admm.scaling = ProximalScaling::as_printed;
    } else if (scaling == "expanded") {
      c.admm.scaling = ProximalScaling::expanded;
    } else {
      throw ConfigError("admm.proximal_scaling must be as_printed or expanded");
    }
  }
  if (!(c.admm.rho > 0.0)) throw ConfigError("admm.rho must be positive");
  if (c.admm.max_iter < 1) throw ConfigError("admm.max_iter must be positive");
  if (c.admm.threads < 1) throw ConfigError("admm.threads must be positive");
  if (c.admm.stop_window < 1) throw ConfigError("admm.stop_window must be positive");

  if (j.contains("failure")) {
    const auto& f = j.at("failure");
    c.failure.alpha_hat = get_or<double>(f, "alpha_hat", 1.0, "failure");
    c.failure.alpha_bar = get_or<double>(f, "alpha_bar", 0.0, "failure");
    c.failure.seed = get_or<std::uint64_t>(f, "seed", 1, "failure");
    c.failure.activity = get_or<std::vector<double>>(f, "activity", {}, "failure");
    c.failure.link_failure = get_or<std::vector<double>>(f, "link_failure", {}, "failure");
  }
  c.case_kind = parse_case(get_or<std::string>(j, "case", "network", "scenario"));
  return c;
}

ScenarioConfig load_config(const fs::path& scenario_file) {
  if (!fs::exists(scenario_file)) throw ConfigError("scenario file not found: " + scenario_file.string());
  return parse_config(slurp(scenario_file), fs::absolute(scenario_file).parent_path());
}

FeederModel load_feeder(const fs::path& file, const std::vector<SupplyPoint>& customers) {
  const std::string where = file.filename().string();
  const json j = parse_json(slurp(file), where);
  const auto& bases = require(j, "bases", where);
  const double s_base = get<double>(bases, "s_base_kva", where + ".bases");
  const double v_base = get<double>(bases, "v_base_kv", where + ".bases");
  if (!(s_base > 0.0 && v_base > 0.0)) throw ConfigError(where + ": bases must be positive");
  const double z_base = v_base * v_base * 1000.0 / s_base;

  double v0 = 1.0;
  if (j.contains("v0")) {
    v0 = get<double>(j, "v0", where);
  } else if (j.contains("source_voltage_kv")) {
    const double mag = get<double>(j, "source_voltage_kv", where) / v_base;
    v0 = mag * mag;
  }

  auto nodes = get<std::vector<int>>(j, "nodes", where);
  std::vector<LineSegment> lines;
  for (const auto& lj : require(j, "lines", where)) {
    LineSegment line;
    line.from_node = get<int>(lj, "from", where + ".lines");
    line.to_node = get<int>(lj, "to", where + ".lines");
    line.phases = parse_phases(get<std::string>(lj, "phases", where + ".lines"));
    for (const auto& [key, val] : require(lj, "impedance", where + ".lines").items()) {
      if (key.size() != 2 || !val.is_array() || val.size() != 2)
        throw ConfigError(where + ": impedance entries look like \"ab\": [r_ohm, x_ohm]");
      const std::complex<double> z(val[0].get<double>(), val[1].get<double>());
      line.impedance[{parse_phase(key[0]), parse_phase(key[1])}] = z / z_base;
    }
    lines.push_back(std::move(line));
  }
  return FeederModel(std::move(nodes), std::move(lines), customers, v0, s_base);
}

std::vector<EvSpec> load_fleet(const fs::path& file) {
  const auto t = CsvTable::read(file);
  std::vector<EvSpec> fleet;
  std::set<std::string> ids;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    EvSpec ev;
    ev.id = t.cell(r, "ev_id");
    if (!ids.insert(ev.id).second) throw ConfigError(file.string() + ": duplicate ev_id " + ev.id);
    ev.supply_point = SupplyPoint::parse(t.cell(r, "supply_point"));
    ev.arrival = static_cast<int>(t.integer(r, "arrival_idx"));
    ev.departure = static_cast<int>(t.integer(r, "departure_idx"));
    ev.capacity_kwh = t.number(r, "capacity_kwh");
    ev.soc0 = t.number(r, "soc0");
    ev.soc_target = t.number(r, "soc_target");
    ev.soc_min = t.number(r, "soc_min");
    ev.soc_max = t.number(r, "soc_max");
    ev.efficiency = t.number(r, "eff");
    ev.x_min_kw = t.number(r, "x_min_kw");
    ev.x_max_kw = t.number(r, "x_max_kw");
    ev.kappa = t.number(r, "kappa");
    fleet.push_back(std::move(ev));
  }
  if (fleet.empty()) throw ConfigError(file.string() + ": no EVs");
  return fleet;
}

Eigen::VectorXd load_price(const fs::path& file, int horizon) {
  const auto t = CsvTable::read(file);
  Eigen::VectorXd price = Eigen::VectorXd::Constant(horizon, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < t.rows(); ++r) price[time_index(t, r, horizon, file.string())] = t.number(r, "price_per_kwh");
  if (price.hasNaN()) throw ConfigError(file.string() + ": price missing for some time steps");
  return price;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> load_baseline(const fs::path& file, const FeederModel& feeder,
                                                          int horizon) {
  const auto t = CsvTable::read(file);
  const int n_sp = feeder.num_supply_points();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_sp, horizon);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n_sp, horizon);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const int step = time_index(t, r, horizon, file.string());
    int row = 0;
    try {
      row = feeder.supply_index(SupplyPoint::parse(t.cell(r, "supply_point_id")));
    } catch (const InvalidQuery& e) {
      throw ConfigError(file.string() + ": " + e.what());
    }
    p(row, step) += t.number(r, "p_kw");
    q(row, step) += t.number(r, "q_kvar");
  }
  return {p, q};
}

DisturbanceSeries load_disturbance(const fs::path& file, int horizon) {
  const auto t = CsvTable::read(file);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  DisturbanceSeries d{Eigen::VectorXd::Constant(horizon, nan), Eigen::VectorXd::Constant(horizon, nan)};
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const int step = time_index(t, r, horizon, file.string());
    d.ambient[step] = t.number(r, "theta_a_K");
    d.current[step] = t.number(r, "i_d_A");
  }
  if (d.ambient.hasNaN() || d.current.hasNaN())
    throw ConfigError(file.string() + ": disturbance missing for some time steps");
  return d;
}

std::vector<std::pair<int, int>> load_edges(const fs::path& file) {
  const auto t = CsvTable::read(file);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t r = 0; r < t.rows(); ++r)
    edges.emplace_back(static_cast<int>(t.integer(r, "from")), static_cast<int>(t.integer(r, "to")));
  return edges;
}

Scenario Scenario::load(const fs::path& scenario_file) { return build(load_config(scenario_file)); }

Scenario Scenario::build(ScenarioConfig config) {
  const int T = config.horizon;
  auto fleet = load_fleet(config.fleet_file);
  std::vector<SupplyPoint> customers;
  for (const auto& ev : fleet) customers.push_back(ev.supply_point);
  auto feeder = load_feeder(config.feeder_file, customers);

  std::vector<BatteryPolytope> polytopes;
  for (const auto& ev : fleet) polytopes.push_back(build_polytope(ev, T, config.step_hours));

  auto price = load_price(config.price_file, T);
  auto sens = build_sensitivity(feeder);
  auto [p, q] = load_baseline(config.baseline_file, feeder, T);
  auto baseline = BaselineSeries::from_loads(feeder, sens, std::move(p), std::move(q));
  auto dist = load_disturbance(config.disturbance_file, T);
  auto thermal = linearize(config.thermal, T);
  const auto head = evcoord::thermal_headroom(thermal, dist, config.thermal);
  auto limits = VoltageLimits::from_band(feeder.num_supply_points(), feeder.v0(), config.voltage_band_percent);
  auto network = assemble(sens, baseline, head.headroom, thermal, limits, feeder.supply_points());
  auto uncoupled = CouplingSystem::uncoupled(T, feeder.num_supply_points(), feeder.num_customers());

  const int n = static_cast<int>(fleet.size());
  if (config.graph.n_agents != 0 && config.graph.n_agents != n)
    throw ConfigError("graph.n_agents (" + std::to_string(config.graph.n_agents) + ") differs from fleet size (" +
                      std::to_string(n) + ")");
  std::vector<std::pair<int, int>> edges;
  int attempts = 0;
  if (!config.graph.edge_file.empty()) {
    edges = load_edges(config.graph.edge_file);
  } else {
    auto g = generate_connected_graph(n, config.graph.edge_prob, config.graph.seed);
    edges = std::move(g.edges);
    attempts = g.attempts;
  }
  CommGraph graph(n, std::move(edges));

  return Scenario{std::move(config), std::move(feeder), std::move(fleet), std::move(polytopes), std::move(price),
                  std::move(sens), std::move(baseline), std::move(dist), std::move(thermal), head.headroom,
                  std::move(limits), std::move(network), std::move(uncoupled), std::move(graph), attempts};
}

Eigen::VectorXd Scenario::total_current(const Eigen::MatrixXd& x_fleet) const {
  return disturbance.current + config.thermal.amps_per_kw() * x_fleet.colwise().sum().transpose();
}

Eigen::VectorXd Scenario::temperature(const Eigen::MatrixXd& x_fleet) const {
  return temperature_profile(thermal, disturbance, config.thermal.theta0, total_current(x_fleet));
}

Eigen::MatrixXd Scenario::voltage_magnitude(const Eigen::MatrixXd& x_fleet) const {
  return voltage_profile(sensitivity, baseline, x_fleet).array().sqrt();
}

Eigen::VectorXd Scenario::per_ev_cost(const Eigen::MatrixXd& x_fleet) const {
  Eigen::VectorXd c(num_agents());
  for (int n = 0; n < num_agents(); ++n)
    c[n] = operational_cost(fleet[static_cast<std::size_t>(n)], price, config.step_hours, x_fleet.row(n).transpose());
  return c;
}

double Scenario::objective(const Eigen::MatrixXd& x_fleet) const { return per_ev_cost(x_fleet).sum(); }

}  // namespace evcoord
