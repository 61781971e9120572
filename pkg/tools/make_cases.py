"""Regenerate the bundled case files in src/sdnrvs/cases/.

ieee33  Baran & Wu 33-bus feeder (12.66 kV, 10 MVA base), five tie branches.
ieee123 Balanced single-phase equivalent of the IEEE 123-node feeder
        (4.16 kV, 10 MVA base).  Voltage regulators and the XFM-1 transformer
        are dropped, closed switches become 50 ft segments, per-phase spot
        loads are summed.  Tie branches 54-94 and 151-300 are the feeder's
        normally open switches; 66-450 and 32-39 are synthetic ties added so
        that the case has four redundant branches.

Run:  python tools/make_cases.py
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "sdnrvs" / "cases"

# --- 33-bus -----------------------------------------------------------------
# (from, to, r ohm, x ohm), 1-based bus numbers
IEEE33_BRANCHES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
    (21, 8, 2.0, 2.0), (9, 15, 2.0, 2.0), (12, 22, 2.0, 2.0),
    (18, 33, 0.5, 0.5), (25, 29, 0.5, 0.5),
]
# kW, kvar at buses 2..33
IEEE33_LOADS = [
    (100, 60), (90, 40), (120, 80), (60, 30), (60, 20), (200, 100), (200, 100),
    (60, 20), (60, 20), (45, 30), (60, 35), (60, 35), (120, 80), (60, 10),
    (60, 20), (60, 20), (90, 40), (90, 40), (90, 40), (90, 40), (90, 40),
    (90, 50), (420, 200), (420, 200), (60, 25), (60, 25), (60, 20), (120, 70),
    (200, 600), (150, 70), (210, 100), (60, 40),
]

# --- 123-bus ----------------------------------------------------------------
# (from, to, length kft, main); main=True uses the three-phase overhead
# positive-sequence impedance, otherwise the single-phase lateral one.
IEEE123_LINES = [
    (1, 2, .175, 0), (1, 3, .25, 0), (1, 7, .3, 1), (3, 4, .2, 0), (3, 5, .325, 0),
    (5, 6, .25, 0), (7, 8, .2, 1), (8, 12, .225, 0), (8, 9, .225, 0), (8, 13, .3, 1),
    (9, 14, .425, 0), (13, 34, .15, 0), (13, 18, .825, 1), (14, 11, .25, 0),
    (14, 10, .25, 0), (15, 16, .375, 0), (15, 17, .35, 0), (18, 19, .25, 0),
    (18, 21, .3, 1), (19, 20, .325, 0), (21, 22, .525, 0), (21, 23, .25, 1),
    (23, 24, .55, 0), (23, 25, .275, 1), (25, 26, .35, 0), (25, 28, .2, 1),
    (26, 27, .275, 0), (26, 31, .225, 0), (27, 33, .5, 0), (28, 29, .3, 1),
    (29, 30, .35, 1), (30, 250, .2, 1), (31, 32, .3, 0), (34, 15, .1, 0),
    (35, 36, .65, 0), (35, 40, .25, 1), (36, 37, .3, 0), (36, 38, .25, 0),
    (38, 39, .325, 0), (40, 41, .325, 0), (40, 42, .25, 1), (42, 43, .5, 0),
    (42, 44, .2, 1), (44, 45, .2, 0), (44, 47, .25, 1), (45, 46, .3, 0),
    (47, 48, .15, 1), (47, 49, .25, 1), (49, 50, .25, 1), (50, 51, .25, 1),
    (51, 151, .5, 1), (52, 53, .2, 1), (53, 54, .125, 1), (54, 55, .275, 0),
    (54, 57, .35, 1), (55, 56, .275, 0), (57, 58, .25, 0), (57, 60, .75, 1),
    (58, 59, .25, 0), (60, 61, .55, 1), (60, 62, .25, 1), (62, 63, .175, 1),
    (63, 64, .35, 1), (64, 65, .425, 1), (65, 66, .325, 1), (67, 68, .2, 0),
    (67, 72, .275, 1), (67, 97, .25, 1), (68, 69, .275, 0), (69, 70, .325, 0),
    (70, 71, .275, 0), (72, 73, .275, 0), (72, 76, .2, 1), (73, 74, .35, 0),
    (74, 75, .4, 0), (76, 77, .4, 1), (76, 86, .7, 1), (77, 78, .1, 1),
    (78, 79, .225, 0), (78, 80, .475, 1), (80, 81, .475, 1), (81, 82, .25, 1),
    (81, 84, .675, 0), (82, 83, .25, 1), (84, 85, .475, 0), (86, 87, .45, 1),
    (87, 88, .175, 0), (87, 89, .275, 1), (89, 90, .225, 0), (89, 91, .225, 1),
    (91, 92, .3, 0), (91, 93, .225, 1), (93, 94, .275, 0), (93, 95, .3, 1),
    (95, 96, .2, 0), (97, 98, .275, 1), (98, 99, .55, 1), (99, 100, .3, 1),
    (100, 450, .8, 1), (101, 102, .225, 0), (101, 105, .275, 1), (102, 103, .325, 0),
    (103, 104, .7, 0), (105, 106, .225, 0), (105, 108, .325, 1), (106, 107, .575, 0),
    (108, 109, .45, 0), (108, 300, 1.0, 1), (109, 110, .3, 0), (110, 111, .575, 0),
    (110, 112, .125, 0), (112, 113, .525, 0), (113, 114, .325, 0), (135, 35, .375, 1),
    (149, 1, .4, 1), (152, 52, .4, 1), (160, 67, .35, 1), (197, 101, .25, 1),
    # closed switches
    (13, 152, .05, 1), (18, 135, .05, 1), (60, 160, .05, 1), (97, 197, .05, 1),
]
IEEE123_TIES = [(54, 94, .05, 1), (151, 300, .05, 1), (66, 450, .5, 1), (32, 39, .5, 0)]
# summed spot loads, kW / kvar
IEEE123_LOADS = {
    1: (40, 20), 2: (20, 10), 4: (40, 20), 5: (20, 10), 6: (40, 20), 7: (20, 10),
    9: (40, 20), 10: (20, 10), 11: (40, 20), 12: (20, 10), 16: (40, 20), 17: (20, 10),
    19: (40, 20), 20: (40, 20), 22: (40, 20), 24: (40, 20), 28: (40, 20), 29: (40, 20),
    30: (40, 20), 31: (20, 10), 32: (20, 10), 33: (40, 20), 34: (40, 20), 35: (40, 20),
    37: (40, 20), 38: (20, 10), 39: (20, 10), 41: (20, 10), 42: (20, 10), 43: (40, 20),
    45: (20, 10), 46: (20, 10), 47: (105, 75), 48: (210, 150), 49: (140, 95),
    50: (40, 20), 51: (20, 10), 52: (40, 20), 53: (40, 20), 55: (20, 10), 56: (20, 10),
    58: (20, 10), 59: (20, 10), 60: (20, 10), 62: (40, 20), 63: (40, 20), 64: (75, 35),
    65: (140, 100), 66: (75, 35), 68: (20, 10), 69: (40, 20), 70: (20, 10), 71: (40, 20),
    73: (40, 20), 74: (40, 20), 75: (40, 20), 76: (245, 180), 77: (40, 20), 79: (40, 20),
    80: (40, 20), 82: (40, 20), 83: (20, 10), 84: (20, 10), 85: (40, 20), 86: (20, 10),
    87: (40, 20), 88: (40, 20), 90: (40, 20), 92: (40, 20), 94: (40, 20), 95: (20, 10),
    96: (20, 10), 98: (40, 20), 99: (40, 20), 100: (40, 20), 102: (20, 10),
    103: (40, 20), 104: (40, 20), 106: (40, 20), 107: (40, 20), 109: (40, 20),
    111: (20, 10), 112: (20, 10), 113: (40, 20), 114: (20, 10),
}
Z_MAIN = (0.306, 0.627)      # ohm / mile
Z_LATERAL = (1.33, 1.35)


def _admittance(r_pu, x_pu):
    d = r_pu * r_pu + x_pu * x_pu
    return r_pu / d, -x_pu / d


def build33():
    base_mva, base_kv = 10.0, 12.66
    zb = base_kv ** 2 / base_mva
    buses = [{"id": 0, "kind": "substation", "v_min": 0.9, "v_max": 1.1, "name": "1",
              "p_min": -1.0, "p_max": 1.0, "q_min": -1.0, "q_max": 1.0}]
    for k in range(1, 33):
        buses.append({"id": k, "kind": "non-substation", "v_min": 0.9, "v_max": 1.1, "name": str(k + 1)})
    branches = []
    for k, (i, j, r, x) in enumerate(IEEE33_BRANCHES):
        g, b = _admittance(r / zb, x / zb)
        branches.append({"id": k, "from": i - 1, "to": j - 1, "g": g, "b": b, "s_max": 1.0})
    p_d = [0.0] + [p / 1000 / base_mva for p, _ in IEEE33_LOADS]
    q_d = [0.0] + [q / 1000 / base_mva for _, q in IEEE33_LOADS]
    # the five tie branches are the last five rows
    n_lines = len(IEEE33_BRANCHES)
    profile = {"p_d": p_d, "q_d": q_d, "renewable_buses": [17, 21, 24, 32], "renewable_capacity": 0.06,
               "normally_open": list(range(n_lines - 5, n_lines))}
    return {"name": "ieee33", "base_mva": base_mva, "buses": buses, "branches": branches}, profile


def build123():
    base_mva, base_kv = 10.0, 4.16
    zb = base_kv ** 2 / base_mva
    names = sorted({n for i, j, *_ in IEEE123_LINES for n in (i, j)})
    names.remove(149)
    names = [149] + names
    idx = {n: k for k, n in enumerate(names)}
    buses = []
    for n in names:
        d = {"id": idx[n], "kind": "substation" if n == 149 else "non-substation",
             "v_min": 0.9, "v_max": 1.1, "name": str(n)}
        if n == 149:
            d.update({"p_min": -1.0, "p_max": 1.0, "q_min": -1.0, "q_max": 1.0})
        buses.append(d)
    branches = []
    for k, (i, j, kft, main) in enumerate(IEEE123_LINES + IEEE123_TIES):
        r, x = Z_MAIN if main else Z_LATERAL
        miles = kft / 5.28
        g, b = _admittance(r * miles / zb, x * miles / zb)
        branches.append({"id": k, "from": idx[i], "to": idx[j], "g": g, "b": b,
                         "s_max": 1.0 if main else 0.5})
    p_d = [0.0] * len(names)
    q_d = [0.0] * len(names)
    for n, (p, q) in IEEE123_LOADS.items():
        p_d[idx[n]] = p / 1000 / base_mva
        q_d[idx[n]] = q / 1000 / base_mva
    ren = [idx[n] for n in (35, 48, 65, 76, 94, 114)]
    ties = list(range(len(IEEE123_LINES), len(IEEE123_LINES) + len(IEEE123_TIES)))
    profile = {"p_d": p_d, "q_d": q_d, "renewable_buses": ren, "renewable_capacity": 0.05,
               "normally_open": ties}
    return {"name": "ieee123", "base_mva": base_mva, "buses": buses, "branches": branches}, profile


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, builder in (("ieee33", build33), ("ieee123", build123)):
        case, profile = builder()
        with open(OUT / f"{name}.json", "w") as fh:
            json.dump(case, fh, indent=1)
            fh.write("\n")
        with open(OUT / f"{name}_profile.json", "w") as fh:
            json.dump(profile, fh, indent=1)
            fh.write("\n")
        print(name, len(case["buses"]), "buses", len(case["branches"]), "branches")


if __name__ == "__main__":
    main()
