"""Generate the bundled four-microgrid 39-bus case (src/mgresilience/data/case39.json).

Line impedances are taken cyclically from the standard 33-bus radial feeder
(ohms, converted on a 12.66 kV / 5 MVA base); load shapes follow the same
feeder's bus demands, rescaled to each microgrid's total.  Network data is a
reconstruction, not measured data.
"""

import argparse
import json
from pathlib import Path

S_BASE_KW = 5000.0
V_BASE_KV = 12.66
Z_BASE = V_BASE_KV**2 / (S_BASE_KW / 1000.0)

# (r, x) ohms of the 33-bus feeder branches, in feeder order
FEEDER_Z = [
    (0.0922, 0.0470), (0.4930, 0.2511), (0.3660, 0.1864), (0.3811, 0.1941), (0.8190, 0.7070),
    (0.1872, 0.6188), (0.7114, 0.2351), (1.0300, 0.7400), (1.0440, 0.7400), (0.1966, 0.0650),
    (0.3744, 0.1238), (1.4680, 1.1550), (0.5416, 0.7129), (0.5910, 0.5260), (0.7463, 0.5450),
    (1.2890, 1.7210), (0.7320, 0.5740), (0.1640, 0.1565), (1.5042, 1.3554), (0.4095, 0.4784),
    (0.7089, 0.9373), (0.4512, 0.3083), (0.8980, 0.7091), (0.8960, 0.7011), (0.2030, 0.1034),
    (0.2842, 0.1447), (1.0590, 0.9337), (0.8042, 0.7006), (0.5075, 0.2585), (0.9744, 0.9630),
    (0.3105, 0.3619), (0.3410, 0.5302),
]
# (p kW, q kvar) demands of feeder buses 2..33
FEEDER_LOAD = [
    (100, 60), (90, 40), (120, 80), (60, 30), (60, 20), (200, 100), (200, 100), (60, 20),
    (60, 20), (45, 30), (60, 35), (60, 35), (120, 80), (60, 10), (60, 20), (60, 20),
    (90, 40), (90, 40), (90, 40), (90, 40), (90, 40), (90, 50), (420, 200), (420, 200),
    (60, 25), (60, 25), (60, 20), (120, 70), (200, 600), (150, 70), (210, 100), (60, 40),
]

# class: (VOLL $/kW, active ZIP (I, C, P), reactive ZIP (I, C, P))
CLASSES = {
    "agricultural": (20.0, (0.30, 0.30, 0.40), (0.50, 0.30, 0.20)),
    "residential": (40.0, (0.45, 0.35, 0.20), (0.60, 0.30, 0.10)),
    "general": (60.0, (0.35, 0.30, 0.35), (0.50, 0.25, 0.25)),
    "commercial": (120.0, (0.40, 0.25, 0.35), (0.55, 0.25, 0.20)),
    "industrial": (200.0, (0.20, 0.25, 0.55), (0.40, 0.30, 0.30)),
}

# parent index of each bus inside a microgrid (bus 0 is the boundary bus)
TREE_10 = [None, 0, 1, 2, 3, 4, 2, 6, 3, 8]
TREE_9 = [None, 0, 1, 2, 3, 2, 5, 6, 3]

MICROGRIDS = [
    # id, tree, total load kW, delta_p0 kW, DERs (id, bus index, p_max kW, ramp kW/min), load classes
    ("m1", TREE_10, 1000.0, 600.0, [("G1", 5, 500, 200), ("G2", 8, 200, 100)],
     ["residential", "residential", "agricultural", "commercial", "general",
      "residential", "industrial", "agricultural", "general"]),
    ("m2", TREE_10, 900.0, 600.0, [("G3", 4, 500, 200)],
     ["agricultural", "residential", "general", "residential", "commercial",
      "agricultural", "residential", "general", "industrial"]),
    ("m3", TREE_10, 1400.0, 1200.0, [("G4", 5, 200, 100), ("G5", 8, 200, 100)],
     ["industrial", "commercial", "general", "residential", "industrial",
      "commercial", "agricultural", "general", "residential"]),
    ("m4", TREE_9, 1100.0, 800.0, [("G6", 4, 500, 200)],
     ["commercial", "general", "residential", "industrial", "agricultural",
      "residential", "commercial", "general"]),
]

LINKS = [("l1", "m1", "m2"), ("l2", "m2", "m3"), ("l3", "m3", "m4"), ("l4", "m1", "m4"), ("l5", "m2", "m4")]


def _admittance(r_ohm: float, x_ohm: float) -> tuple[float, float]:
    r, x = r_ohm / Z_BASE, x_ohm / Z_BASE
    d = r * r + x * x
    return r / d, -x / d


def build() -> dict:
    microgrids = []
    bus_no = 0
    line_no = 0
    load_no = 0
    for mg_id, tree, total_kw, dp0_kw, ders, classes in MICROGRIDS:
        ids = [f"b{bus_no + k + 1}" for k in range(len(tree))]
        bus_no += len(tree)
        buses = [
            {"id": b, "v_min": 0.95, "v_max": 1.05, "is_boundary": k == 0} for k, b in enumerate(ids)
        ]
        lines = []
        for k, parent in enumerate(tree):
            if parent is None:
                continue
            g, b = _admittance(*FEEDER_Z[line_no % len(FEEDER_Z)])
            line_no += 1
            lines.append(
                {"id": f"{ids[parent]}-{ids[k]}", "from_bus": ids[parent], "to_bus": ids[k],
                 "g": round(g, 6), "b": round(b, 6), "p_loss_max": 0.01}
            )
        shapes = []
        for _ in range(len(tree) - 1):
            shapes.append(FEEDER_LOAD[load_no % len(FEEDER_LOAD)])
            load_no += 1
        scale = total_kw / sum(p for p, _ in shapes)
        loads = []
        for k, ((p, q), cls) in enumerate(zip(shapes, classes)):
            voll, zp, zq = CLASSES[cls]
            loads.append(
                {"id": f"d{ids[k + 1][1:]}", "bus": ids[k + 1], "p_bar": p * scale / S_BASE_KW,
                 "q_bar": q * scale / S_BASE_KW, "zip_p": list(zp), "zip_q": list(zq),
                 "voll": voll * S_BASE_KW, "load_class": cls}
            )
        der_list = []
        for gid, k, pmax, ramp in ders:
            der_list.append(
                {"id": gid, "bus": ids[k], "p_min": 100 / S_BASE_KW, "p_max": pmax / S_BASE_KW,
                 "q_min": -pmax / S_BASE_KW, "q_max": pmax / S_BASE_KW,
                 "ramp_up": ramp / S_BASE_KW, "ramp_down": ramp / S_BASE_KW,
                 "p_initial": (pmax - ramp) / S_BASE_KW}
            )
        microgrids.append(
            {"id": mg_id, "boundary_bus": ids[0], "buses": buses, "lines": lines, "ders": der_list,
             "loads": loads, "dynamics": {"H": 0.9, "R": 0.08, "T": 0.008, "T_prime": 0.1},
             "delta_p0": dp0_kw / S_BASE_KW, "delta_q0": 0.0,
             "linking_v_min": 0.95, "linking_v_max": 1.05}
        )
    links = [
        {"id": lid, "from_mg": a, "to_mg": b, "g": 4.0, "b": -8.0, "p_flow_max": 0.2,
         "q_flow_max": 0.2, "p_loss_max": 0.01}
        for lid, a, b in LINKS
    ]
    return {
        "metadata": {
            "name": "case39",
            "reconstruction": True,
            "description": "Four microgrids, 39 buses, 6 DERs, 5 switchable linking lines. "
            "Impedances and load shapes reuse the standard 33-bus feeder; load classes, "
            "ZIP coefficients and VOLLs are synthetic.",
            "units": "pu on bases; voll in $ per pu (i.e. $/kW x s_base); limits in Hz",
        },
        "bases": {"s_base": S_BASE_KW, "v_base": V_BASE_KV, "f_nominal": 50.0},
        "damping": 1.0,
        "frequency_limits": {"nadir_min_hz": -0.5, "nadir_max_hz": 0.5, "ss_min_hz": -0.1, "ss_max_hz": 0.1},
        "severity": sum(m["delta_p0"] for m in microgrids),
        "microgrids": microgrids,
        "linking_lines": links,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default = Path(__file__).resolve().parents[1] / "src" / "mgresilience" / "data" / "case39.json"
    ap.add_argument("--out", type=Path, default=default)
    args = ap.parse_args()
    args.out.write_text(json.dumps(build(), indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
