"""Time-series ingestion and k-medoids reduction into weighted scenarios."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, IngestionError
from .network import Network

KINDS = ("load_p", "ren_p")


@dataclass(frozen=True)
class Sample:
    """Per-bus renewable generation and load, per-unit.

    All four vectors have one entry per bus; the substation entry is unused.
    """

    p_r: np.ndarray
    q_r: np.ndarray
    p_d: np.ndarray
    q_d: np.ndarray
    label: str = ""

    def __post_init__(self):
        n = len(self.p_r)
        for name in ("p_r", "q_r", "p_d", "q_d"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DimensionError(f"{name} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.p_d < 0) or np.any(self.p_r < 0):
            raise ValueError("active load and renewable generation must be non-negative")

    @property
    def n_bus(self) -> int:
        return len(self.p_r)

    def scaled(self, load=1.0, renewable=1.0) -> "Sample":
        return Sample(self.p_r * renewable, self.q_r * renewable,
                      self.p_d * load, self.q_d * load, self.label)


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Sample, ...]
    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        pi = np.array(self.pi, dtype=float)
        if pi.shape != (len(self.scenarios),):
            raise DimensionError("one probability per scenario required")
        if np.any(pi <= 0):
            raise ValueError("scenario probabilities must be positive")
        if abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError(f"scenario probabilities sum to {pi.sum()!r}, not 1")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(zip(self.pi, self.scenarios))

    @classmethod
    def single(cls, sample: Sample) -> "ScenarioSet":
        return cls((sample,), np.ones(1))

    @classmethod
    def uniform(cls, samples) -> "ScenarioSet":
        samples = tuple(samples)
        return cls(samples, np.full(len(samples), 1.0 / len(samples)))


def reactive_ratio(power_factor: float) -> float:
    """``tan(arccos(pf))``, the q/p ratio at a fixed power factor."""
    if not 0 < power_factor <= 1:
        raise ValueError(f"power factor must be in (0, 1], got {power_factor}")
    return math.tan(math.acos(power_factor))


def net_injections(sample: Sample, net: Network):
    """Net injections ``p_r - p_d`` and ``q_r - q_d`` per bus.

    The substation entry is set to zero; its injection is a power-flow
    result, not an input.
    """
    if sample.n_bus != net.n_bus:
        raise DimensionError(f"sample has {sample.n_bus} buses, network has {net.n_bus}")
    p = sample.p_r - sample.p_d
    q = sample.q_r - sample.q_d
    p[net.substation] = 0.0
    q[net.substation] = 0.0
    return p, q


def ingest_timeseries(source, net: Network, power_factor: float = 1.0,
                      renewable_scale: float = 1.0, bus_scale=None) -> list[Sample]:
    """Read an hourly CSV into samples.

    The first column is a timestamp label; every other column is named
    ``<busid>:<kind>`` with kind ``load_p`` or ``ren_p`` and holds per-unit
    active power.  Reactive power follows from ``power_factor``, renewable
    active power is multiplied by ``renewable_scale`` and every column of a
    bus by ``bus_scale[bus]`` when given.

    Parameters
    ----------
    source : path or text stream or str
        A path to a CSV file, an open text stream, or the CSV text itself.
    """
    ratio = reactive_ratio(power_factor)
    rows = list(csv.reader(_open_text(source)))
    if not rows:
        raise IngestionError("empty time series")
    header, data = rows[0], rows[1:]
    columns = []
    for name in header[1:]:
        try:
            bus_s, kind = name.strip().split(":")
            bus = int(bus_s)
        except ValueError:
            raise IngestionError(f"bad column name {name!r}; expected '<busid>:<kind>'") from None
        if kind not in KINDS:
            raise IngestionError(f"column {name!r}: unknown kind {kind!r}")
        if not 0 <= bus < net.n_bus or bus == net.substation:
            raise IngestionError(f"column {name!r}: bus {bus} is not a non-substation bus of the network")
        columns.append((bus, kind))
    scale = np.ones(net.n_bus)
    if bus_scale:
        for bus, factor in dict(bus_scale).items():
            scale[int(bus)] = float(factor)

    samples = []
    for r, row in enumerate(data):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise IngestionError(f"expected {len(header)} fields, found {len(row)}", row=r)
        p_r = np.zeros(net.n_bus)
        p_d = np.zeros(net.n_bus)
        for (bus, kind), cell in zip(columns, row[1:]):
            if not cell.strip():
                raise IngestionError(f"missing value for bus {bus} {kind}", row=r)
            try:
                val = float(cell)
            except ValueError:
                raise IngestionError(f"non-numeric value {cell!r}", row=r) from None
            if val < 0 or not math.isfinite(val):
                raise IngestionError(f"bus {bus} {kind}: negative or non-finite power {val}", row=r)
            if kind == "load_p":
                p_d[bus] += val * scale[bus]
            else:
                p_r[bus] += val * scale[bus] * renewable_scale
        samples.append(Sample(p_r, p_r * ratio, p_d, p_d * ratio, row[0]))
    return samples


def _open_text(source):
    if hasattr(source, "read"):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        return open(source, newline="")
    return io.StringIO(source)


def write_timeseries(samples, path) -> None:
    """Write samples as a ``<busid>:<kind>`` CSV (active power only)."""
    n = samples[0].n_bus
    cols = [(b, "load_p") for b in range(n) if any(s.p_d[b] for s in samples)]
    cols += [(b, "ren_p") for b in range(n) if any(s.p_r[b] for s in samples)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp"] + [f"{b}:{k}" for b, k in cols])
        for s in samples:
            w.writerow([s.label] + [repr(float(s.p_d[b] if k == "load_p" else s.p_r[b])) for b, k in cols])


def _features(samples):
    return np.array([np.concatenate([s.p_r, s.p_d]) for s in samples])


def _pam_cost(dist, medoids):
    return dist[:, medoids].min(axis=1).sum()


def _sum_min(dist, floor, chunk=1024):
    """``np.minimum(dist, floor[:, None]).sum(axis=0)`` in row blocks."""
    out = np.zeros(dist.shape[1])
    for start in range(0, dist.shape[0], chunk):
        block = dist[start:start + chunk]
        out += np.minimum(block, floor[start:start + chunk, None]).sum(axis=0)
    return out


def pam(dist: np.ndarray, k: int, seed: int = 0):
    """PAM k-medoids on a precomputed distance matrix.

    Greedy BUILD followed by steepest-descent SWAP.  Ties between equal-cost
    choices are resolved by a seeded random priority over the points, so
    the result is a pure function of ``(dist, k, seed)``.

    Returns
    -------
    medoids : ndarray of int
        Medoid indices, sorted ascending.
    labels : ndarray of int
        Cluster index (position in ``medoids``) of every point.
    costs : list of float
        Objective after BUILD and after every accepted swap.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    priority = np.random.default_rng(seed).permutation(n)

    def pick(values, allowed):
        # lowest value, ties broken by priority
        values = np.where(allowed, values, np.inf)
        ties = np.flatnonzero(values == values.min())
        return int(ties[np.argmin(priority[ties])])

    free = np.ones(n, dtype=bool)
    medoids = [pick(dist.sum(axis=0), free)]
    free[medoids[0]] = False
    nearest = dist[:, medoids[0]].copy()
    while len(medoids) < k:
        m = pick(_sum_min(dist, nearest), free)
        medoids.append(m)
        free[m] = False
        nearest = np.minimum(nearest, dist[:, m])

    history = [float(_pam_cost(dist, medoids))]
    while True:
        current = history[-1]
        d = dist[:, medoids]
        order = np.argsort(d, axis=1, kind="stable")
        first = d[np.arange(n), order[:, 0]]
        second = d[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        # cost[pos, h]: objective after replacing medoids[pos] by h
        cost = np.empty((k, n))
        for pos in range(k):
            floor = np.where(order[:, 0] == pos, second, first)
            cost[pos] = np.where(free, _sum_min(dist, floor), np.inf)
        best = cost.min()
        if not best < current - 1e-12 * max(1.0, abs(current)):
            break
        pos_idx, h_idx = np.nonzero(cost == best)
        pick_at = np.lexsort((pos_idx, priority[h_idx]))[0]
        pos, h = int(pos_idx[pick_at]), int(h_idx[pick_at])
        free[medoids[pos]] = True
        free[h] = False
        medoids[pos] = h
        history.append(float(_pam_cost(dist, medoids)))

    medoids = np.array(sorted(medoids))
    labels = np.argmin(dist[:, medoids], axis=1)
    return medoids, labels, history


def euclidean_distances(x: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between the rows of ``x``."""
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def kmedoids_reduce(samples, k: int, seed: int = 0) -> ScenarioSet:
    """Cluster samples into ``k`` scenarios weighted by cluster size.

    Distance is Euclidean on the concatenated ``(p_r, p_d)`` vectors.  Each
    scenario is the medoid sample of its cluster; scenarios are ordered by
    medoid position in ``samples``.
    """
    samples = list(samples)
    if not 1 <= k <= len(samples):
        raise ValueError(f"k must be in [1, {len(samples)}], got {k}")
    dist = euclidean_distances(_features(samples))
    medoids, labels, _ = pam(dist, k, seed)
    sizes = np.bincount(labels, minlength=k)
    return ScenarioSet(tuple(samples[m] for m in medoids), sizes / len(samples))


# --- serialization --------------------------------------------------------

def sample_to_dict(s: Sample) -> dict:
    return {"label": s.label, "p_r": s.p_r.tolist(), "q_r": s.q_r.tolist(),
            "p_d": s.p_d.tolist(), "q_d": s.q_d.tolist()}


def sample_from_dict(d: dict) -> Sample:
    return Sample(d["p_r"], d["q_r"], d["p_d"], d["q_d"], d.get("label", ""))


def save_scenarios(scen: ScenarioSet, path) -> None:
    doc = {"format": "sdnrvs-scenarios/1",
           "pi": scen.pi.tolist(),
           "samples": [sample_to_dict(s) for s in scen.scenarios]}
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_scenarios(path) -> ScenarioSet:
    with open(path) as fh:
        doc = json.load(fh)
    return ScenarioSet(tuple(sample_from_dict(d) for d in doc["samples"]), doc["pi"])


def case_profile(name: str) -> dict:
    """Nominal load and renewable placement of a bundled case."""
    with open(Path(__file__).parent / "cases" / f"{name}_profile.json") as fh:
        return json.load(fh)


def nominal_sample(net: Network, profile=None) -> Sample:
    """Peak-load sample without renewables for a bundled case."""
    prof = case_profile(net.name) if profile is None else profile
    z = np.zeros(net.n_bus)
    return Sample(z, z, np.array(prof["p_d"]), np.array(prof["q_d"]), "nominal")
