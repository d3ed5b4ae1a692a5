#!/usr/bin/env python3
"""Writes the bundled scenarios under scenarios/.

Every file is derived from the parameters below and a fixed seed, so running
the script again reproduces the committed data byte for byte.
"""

import argparse
import json
import math
import random
from pathlib import Path

RMS_VOLTAGE = 240.0

THERMAL = {
    "heat_capacity_J_per_K": 1.0e6,
    "heat_resistance_K_per_W": 0.012,
    "coil_resistance_ohm": 0.0365,
    "theta_eq_K": 363.0,
    "ambient_eq_K": 293.0,
    "rms_voltage_V": RMS_VOLTAGE,
    "watts_per_kw": 1000.0,
}

SELF_Z = (0.030, 0.015)
MUTUAL_Z = (0.008, 0.004)


def line(frm, to, phases, scale):
    imp = {}
    for i, p in enumerate(phases):
        for q in phases[i:]:
            base = SELF_Z if p == q else MUTUAL_Z
            imp[p + q] = [round(base[0] * scale, 6), round(base[1] * scale, 6)]
    return {"from": frm, "to": to, "phases": phases, "impedance": imp}


def supply_points(feeder):
    pts = []
    for ln in sorted(feeder["lines"], key=lambda l: l["to"]):
        for p in ln["phases"]:
            pts.append(f'{ln["to"]}:{p}')
    return pts


def tou_price(hour, prices):
    h = hour % 24
    if 14 <= h < 20:
        return prices["peak"]
    if 7 <= h < 14 or 20 <= h < 22:
        return prices["shoulder"]
    if prices.get("super") is not None and 1 <= h < 5:
        return prices["super"]
    return prices["off"]


def residential(hour):
    """Per-customer demand shape, kW: evening peak, low at night."""
    h = hour % 24
    return 0.7 + 0.5 * math.exp(-((h - 19.0) ** 2) / 6.0) + 0.4 * math.exp(-((h - 8.0) ** 2) / 4.0)


def ambient(hour):
    return 291.0 + 5.0 * math.cos(2.0 * math.pi * (hour - 15.0) / 24.0)


def write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(str(v) for v in r) + "\n")


def build(out, spec):
    rng = random.Random(spec["seed"])
    out.mkdir(parents=True, exist_ok=True)
    T, dt, start = spec["horizon"], spec["step_hours"], spec["start_hour"]
    hours = [start + (t + 0.5) * dt for t in range(T)]

    feeder = {
        "bases": {"s_base_kva": 100.0, "v_base_kv": 0.24},
        "source_voltage_kv": 0.24 * spec.get("head_pu", 1.0),
        "nodes": spec["nodes"],
        "lines": [line(*l) for l in spec["lines"]],
    }
    (out / "feeder.json").write_text(json.dumps(feeder, indent=2) + "\n")
    pts = supply_points(feeder)

    fleet_rows = []
    for n in range(spec["n_evs"]):
        sp = pts[n % len(pts)] if spec.get("round_robin", True) else rng.choice(pts)
        arr = rng.randint(*spec["arrival"])
        dep = rng.randint(*spec["departure"])
        cap = rng.choice(spec["capacities"])
        soc0 = round(rng.uniform(*spec["soc0"]), 3)
        target = spec["soc_target"]
        xmax = spec["x_max_kw"]
        fleet_rows.append([f"ev{n + 1:02d}", sp, arr, dep, cap, soc0, target, 0.1, 0.95, 0.95,
                           -xmax, xmax, spec["kappa"]])
    write_csv(out / "fleet.csv",
              ["ev_id", "supply_point", "arrival_idx", "departure_idx", "capacity_kwh", "soc0", "soc_target",
               "soc_min", "soc_max", "eff", "x_min_kw", "x_max_kw", "kappa"], fleet_rows)

    write_csv(out / "price.csv", ["time_index", "price_per_kwh"],
              [[t + 1, tou_price(hours[t], spec["prices"])] for t in range(T)])

    base_rows = []
    total = [0.0] * T
    for k, sp in enumerate(pts):
        customers = spec["customers_per_point"]
        for t in range(T):
            p = round(customers * residential(hours[t]) * (1.0 + 0.05 * math.sin(k + t)), 4)
            q = round(0.3 * p, 4)
            base_rows.append([t + 1, sp, p, q])
            total[t] += p
    write_csv(out / "baseline.csv", ["time_index", "supply_point_id", "p_kw", "q_kvar"], base_rows)

    write_csv(out / "disturbance.csv", ["time_index", "theta_a_K", "i_d_A"],
              [[t + 1, round(ambient(hours[t]), 3), round(total[t] * 1000.0 / RMS_VOLTAGE, 4)] for t in range(T)])

    thermal = dict(THERMAL)
    thermal["theta0_K"] = spec["theta0_K"]
    scenario = {
        "name": spec["name"],
        "horizon": T,
        "step_hours": dt,
        "files": {"feeder": "feeder.json", "fleet": "fleet.csv", "price": "price.csv",
                  "baseline": "baseline.csv", "disturbance": "disturbance.csv"},
        "thermal": thermal,
        "limits": {"voltage_band_percent": 4.6, "theta_max_K": 393.0},
        "graph": {"n_agents": spec["n_evs"], "edge_prob": spec["edge_prob"], "seed": spec["seed"]},
        "admm": {"rho": spec["rho"], "max_iter": 10000, "eps_dual": 1e-6, "eps_primal": 1e-6,
                 "proximal_scaling": "as_printed"},
        "failure": {"alpha_hat": 1.0, "alpha_bar": 0.0, "seed": 1},
        "case": "network",
    }
    (out / "scenario.json").write_text(json.dumps(scenario, indent=2) + "\n")


SCENARIOS = {
    "tiny": {
        "name": "tiny", "seed": 2, "horizon": 2, "step_hours": 1.0, "start_hour": 0.0,
        "nodes": [0, 1], "lines": [(0, 1, "a", 7)],
        "n_evs": 2, "arrival": (0, 0), "departure": (2, 2), "capacities": [20.0],
        "soc0": (0.45, 0.55), "soc_target": 0.9, "x_max_kw": 7.0, "kappa": 0.01,
        "prices": {"peak": 0.30, "shoulder": 0.15, "off": 0.08, "super": 0.05},
        "customers_per_point": 4, "theta0_K": 380.0, "edge_prob": 1.0, "rho": 1.0,
    },
    "mini": {
        "name": "mini", "seed": 3, "horizon": 8, "step_hours": 1.0, "start_hour": 21.0,
        "nodes": [0, 1], "lines": [(0, 1, "a", 8)],
        "n_evs": 2, "arrival": (0, 1), "departure": (7, 8), "capacities": [40.0],
        "soc0": (0.2, 0.3), "soc_target": 0.8, "x_max_kw": 7.0, "kappa": 0.01,
        "prices": {"peak": 0.30, "shoulder": 0.15, "off": 0.08, "super": 0.05},
        "customers_per_point": 4, "theta0_K": 330.0, "edge_prob": 1.0, "rho": 1.0,
    },
    "medium": {
        "name": "medium", "seed": 5, "horizon": 12, "step_hours": 1.0, "start_hour": 19.0,
        "nodes": [0, 1, 2], "lines": [(0, 1, "abc", 4.0), (1, 2, "ab", 4.0)],
        "n_evs": 5, "arrival": (0, 2), "departure": (10, 12), "capacities": [40.0, 60.0],
        "soc0": (0.2, 0.4), "soc_target": 0.85, "x_max_kw": 7.0, "kappa": 0.01,
        "prices": {"peak": 0.30, "shoulder": 0.15, "off": 0.08, "super": 0.05},
        "customers_per_point": 5, "theta0_K": 340.0, "edge_prob": 0.6, "rho": 1.0,
    },
    "congested": {
        "name": "congested", "seed": 11, "horizon": 48, "step_hours": 0.5, "start_hour": 12.0,
        "nodes": [0, 1, 2, 3], "lines": [(0, 1, "abc", 1.5), (1, 2, "abc", 1.5), (1, 3, "bc", 1.8)],
        "n_evs": 20, "arrival": (11, 16), "departure": (37, 42), "capacities": [40.0, 60.0, 75.0],
        "soc0": (0.15, 0.35), "soc_target": 0.9, "x_max_kw": 7.2, "kappa": 0.01,
        "prices": {"peak": 0.30, "shoulder": 0.15, "off": 0.08, "super": 0.05},
        "customers_per_point": 8, "theta0_K": 350.0, "edge_prob": 0.3, "rho": 10.0,
    },
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "scenarios"))
    ap.add_argument("names", nargs="*", default=list(SCENARIOS))
    args = ap.parse_args()
    for name in args.names:
        build(Path(args.out) / name, SCENARIOS[name])


if __name__ == "__main__":
    main()
