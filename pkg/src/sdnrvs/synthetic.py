"""Small generated networks and load/renewable time series.

Used by the test suite, the demos and desk-scale experiments in place of
measured data.
"""

from __future__ import annotations

import numpy as np

from .network import NON_SUBSTATION, SUBSTATION, Branch, Bus, Network
from .scenario import Sample, reactive_ratio


def _bus(k, v_min=0.9, v_max=1.1):
    if k == 0:
        return Bus(0, SUBSTATION, v_min, v_max, -10.0, 10.0, -10.0, 10.0)
    return Bus(k, NON_SUBSTATION, v_min, v_max)


def line_network(n, g=1.0, b=-10.0) -> Network:
    """Buses ``0 - 1 - ... - n-1`` with identical branches."""
    buses = [_bus(k) for k in range(n)]
    branches = [Branch(k, k, k + 1, g, b) for k in range(n - 1)]
    return Network(tuple(buses), tuple(branches), 1.0, f"line{n}")


def ring_network(n, g=1.0, b=-10.0, v_min=0.8) -> Network:
    """A single loop ``0 - 1 - ... - n-1 - 0`` fed at bus 0."""
    buses = [_bus(k, v_min=v_min) for k in range(n)]
    branches = [Branch(k, k, (k + 1) % n, g, b) for k in range(n)]
    return Network(tuple(buses), tuple(branches), 1.0, f"ring{n}")


def two_bus(g=1.0, b=-10.0) -> Network:
    return line_network(2, g, b)


def random_meshed_network(n_bus, n_loops, rng, v_min=0.8, s_max=np.inf) -> Network:
    """Random tree plus ``n_loops`` extra branches.

    Tree branches attach each new bus to a uniformly chosen earlier bus;
    extra branches join random non-adjacent bus pairs.  Series impedances
    are drawn from ``r in [0.01, 0.06]``, ``x/r in [0.8, 2.5]`` per-unit.
    """
    buses = [_bus(k, v_min=v_min) for k in range(n_bus)]
    pairs = [(int(rng.integers(0, k)), k) for k in range(1, n_bus)]
    existing = {frozenset(p) for p in pairs}
    while len(pairs) < n_bus - 1 + n_loops:
        i, j = (int(v) for v in rng.choice(n_bus, size=2, replace=False))
        if frozenset((i, j)) in existing:
            continue
        existing.add(frozenset((i, j)))
        pairs.append((min(i, j), max(i, j)))
    branches = []
    for k, (i, j) in enumerate(pairs):
        r = rng.uniform(0.01, 0.06)
        x = r * rng.uniform(0.8, 2.5)
        d = r * r + x * x
        branches.append(Branch(k, i, j, r / d, -x / d, s_max))
    return Network(tuple(buses), tuple(branches), 1.0, f"random{n_bus}_{n_loops}")


def random_samples(net, n, rng, load=(0.02, 0.12), renewable_buses=(), renewable=(0.0, 0.1),
                   power_factor=0.95):
    """Independent uniform load and renewable draws at every non-substation bus."""
    ratio = reactive_ratio(power_factor)
    out = []
    for s in range(n):
        p_d = rng.uniform(*load, size=net.n_bus)
        p_d[net.substation] = 0.0
        p_r = np.zeros(net.n_bus)
        for bus in renewable_buses:
            p_r[bus] = rng.uniform(*renewable)
        out.append(Sample(p_r, p_r * ratio, p_d, p_d * ratio, f"s{s}"))
    return out


def daily_profiles(hours, rng):
    """Load, solar and wind capacity factors for ``hours`` consecutive hours.

    Load follows a two-peak daily shape with 5 % noise; solar is a clipped
    sine over 6:00-18:00 with random cloudiness; wind is a mean-reverting
    random walk on [0, 1].
    """
    h = np.arange(hours) % 24
    load = 0.6 + 0.25 * np.exp(-((h - 11) / 3.0) ** 2) + 0.35 * np.exp(-((h - 19) / 2.5) ** 2)
    load = load / load.max() * (1 + 0.05 * rng.standard_normal(hours))
    day = np.clip(np.sin((h - 6) / 12 * np.pi), 0, None)
    cloud = np.repeat(rng.uniform(0.3, 1.0, size=hours // 24 + 1), 24)[:hours]
    solar = day * cloud
    wind = np.empty(hours)
    w = 0.4
    for t in range(hours):
        w = np.clip(w + 0.2 * (0.4 - w) + 0.12 * rng.standard_normal(), 0.0, 1.0)
        wind[t] = w
    return np.clip(load, 0.05, None), solar, wind


def synthetic_timeseries(net, profile, hours, seed=0, power_factor=0.95, renewable_scale=1.0):
    """Hourly samples for a bundled case profile.

    Every load bus follows the common daily load factor times its nominal
    load with an extra 10 % per-bus jitter; each renewable bus hosts a wind
    turbine and a solar panel splitting the profile's capacity equally.
    """
    rng = np.random.default_rng(seed)
    load, solar, wind = daily_profiles(hours, rng)
    p_nom = np.asarray(profile["p_d"], dtype=float)
    cap = float(profile["renewable_capacity"]) * renewable_scale
    ratio = reactive_ratio(power_factor)
    out = []
    for t in range(hours):
        jitter = 1 + 0.1 * rng.standard_normal(net.n_bus)
        p_d = np.clip(p_nom * load[t] * jitter, 0.0, None)
        p_r = np.zeros(net.n_bus)
        for bus in profile["renewable_buses"]:
            p_r[bus] = 0.5 * cap * (solar[t] + wind[t])
        out.append(Sample(p_r, p_r * ratio, p_d, p_d * ratio, f"h{t:05d}"))
    return out
