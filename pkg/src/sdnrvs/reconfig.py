"""Successive branch reduction (SBR) for stability-aware reconfiguration.

The objective of a radial configuration ``alpha`` is::

    score = k_l * C_l / C_l_max + k_v * I_v / I_v_max

with ``C_l`` the probability-weighted network loss and ``I_v`` the
probability-weighted stability index.  :func:`one_stage_sbr` picks the
branch to open in a network with a single loop; :func:`two_stage_sbr`
opens one branch per loop and then refines the choice by repeatedly
closing one opened branch and re-solving the single-loop problem.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import (InfeasibleTopologyError, NoFeasibleTopologyError, PreconditionError,
                     TopologyError)
from .network import Loop, Network, check_alpha, chordless_loops, is_connected, opened_ids
from .powerflow import SolverOptions, check_limits, expected_loss, jacobian, sigma_min, solve_scenarios
from .stability import SIGMA_MIN, Evaluator, scenario_indices

# relative tolerance for "all inner objectives equal" in the outer loop
EQUAL_RTOL = 1e-9
C_L_MAX_FACTOR = 10.0


@dataclass(frozen=True)
class ObjectiveWeights:
    """Objective weights and normalizers.

    ``C_l_max`` and ``I_v_max`` may be left ``None`` and filled in by the SBR
    routines (see :func:`resolve_weights`).
    """

    k_l: float = 0.5
    k_v: float = -0.5
    C_l_max: float | None = None
    I_v_max: float | None = None

    def __post_init__(self):
        if not self.k_l > 0:
            raise ValueError("k_l must be positive")
        if not np.isfinite(self.k_v):
            raise ValueError("k_v must be finite")
        for name in ("C_l_max", "I_v_max"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")

    @property
    def resolved(self) -> bool:
        return self.C_l_max is not None and self.I_v_max is not None

    def check_orientation(self, kind) -> None:
        """Reject a ``k_v`` whose sign would reward instability."""
        if self.k_v != 0 and np.sign(self.k_v) != kind.stable_sign:
            raise PreconditionError(
                f"k_v = {self.k_v} has the wrong sign for {kind.name} ({kind.orientation})"
            )


def objective_score(loss: float, index: float, w: ObjectiveWeights) -> float:
    """Weighted, normalized objective; non-finite inputs score ``+inf``."""
    if not w.resolved:
        raise PreconditionError("objective normalizers are not set")
    if not (np.isfinite(loss) and (w.k_v == 0 or np.isfinite(index))):
        return np.inf
    score = w.k_l * loss / w.C_l_max
    if w.k_v != 0:
        score += w.k_v * index / w.I_v_max
    return float(score) if np.isfinite(score) else np.inf


@dataclass
class TopologyEval:
    alpha: np.ndarray
    loss: float
    index: float
    score: float
    feasible: bool
    reason: str = ""
    sols: list = field(default=None, repr=False)


def evaluate_topology(net: Network, alpha, scen, weights: ObjectiveWeights, ev: Evaluator,
                      opts: SolverOptions | None = None) -> TopologyEval:
    """Expected loss, expected index and objective of one radial configuration.

    A configuration is infeasible (score ``+inf``) when any scenario fails to
    converge or violates a voltage, flow or substation limit.
    """
    alpha = check_alpha(net, alpha).copy()
    sols = solve_scenarios(net, alpha, scen, opts)
    if not all(s.converged for s in sols):
        return TopologyEval(alpha, np.nan, np.nan, np.inf, False, "diverged", sols)
    loss = float(scen.pi @ np.array([s.loss for s in sols]))
    if any(check_limits(s, net) for s in sols):
        return TopologyEval(alpha, loss, np.nan, np.inf, False, "limits", sols)
    index = float(scen.pi @ scenario_indices(ev, net, alpha, scen, sols))
    score = objective_score(loss, index, weights)
    return TopologyEval(alpha, loss, index, score, bool(np.isfinite(score)), "" if np.isfinite(score) else "score", sols)


# --- loop geometry --------------------------------------------------------

def _sent(net, flows, e, bus):
    """Active power sent from ``bus`` into branch ``e``."""
    return flows[e, 0] if int(net.f[e]) == bus else flows[e, 2]


def loop_injection(net: Network, sols, pi, loop: Loop, bus: int) -> float:
    """Expected active power that ``bus`` sends into ``loop``.

    Sums the flows leaving ``bus`` over its two loop branches, weighted by
    the scenario probabilities.

    Raises
    ------
    ValueError
        If ``bus`` is not on the loop.
    """
    if bus not in loop.buses:
        raise ValueError(f"bus {bus} is not on the loop")
    pos = loop.buses.index(bus)
    n = len(loop.buses)
    incident = (loop.branches[pos - 1] if pos > 0 else loop.branches[n - 1], loop.branches[pos])
    total = 0.0
    for p, sol in zip(np.asarray(pi, dtype=float), sols):
        total += p * sum(_sent(net, sol.flows, e, bus) for e in incident)
    return float(total)


def subpaths(loop: Loop, injections) -> list[list[int]]:
    """Cut the loop at every bus with positive injection.

    ``injections[k]`` belongs to ``loop.buses[k]``.  Each arc runs from one
    injecting bus to the next along the loop order.

    Raises
    ------
    PreconditionError
        If no bus injects power into the loop.
    """
    inj = np.asarray(injections, dtype=float)
    if inj.shape != (len(loop.buses),):
        raise ValueError("one injection per loop bus required")
    cuts = np.flatnonzero(inj > 0)
    if cuts.size == 0:
        raise PreconditionError("no bus injects power into the loop; the operating point is inconsistent")
    n = len(loop.branches)
    out = []
    for a, b in zip(cuts, np.roll(cuts, -1)):
        length = (b - a) % n or n
        out.append([loop.branches[(a + s) % n] for s in range(length)])
    return out


def expected_abs_flow(sols, pi) -> np.ndarray:
    """Per-branch expected absolute from-end active flow."""
    return np.asarray(pi, dtype=float) @ np.abs(np.stack([s.flows[:, 0] for s in sols]))


def expected_flow(sols, pi) -> np.ndarray:
    return np.asarray(pi, dtype=float) @ np.stack([s.flows[:, 0] for s in sols])


def min_flow_branch(sub_path, sols, pi, allowed=None) -> int:
    """Branch of ``sub_path`` with least expected absolute flow, lowest id on ties.

    ``allowed`` optionally masks out branches that may not be opened.
    """
    if len(sub_path) == 0:
        raise ValueError("empty sub-path")
    mean_abs = expected_abs_flow(sols, pi)
    cand = sorted(int(e) for e in sub_path if allowed is None or allowed[e])
    if not cand:
        raise PreconditionError("sub-path has no switchable branch")
    vals = mean_abs[cand]
    return cand[int(np.argmin(vals))]


def loop_neighbours(loop: Loop, e: int, net: Network):
    """``(e_up, e_down)``: loop branches at the from- and to-bus of ``e``."""
    k = loop.branches.index(e)
    n = len(loop.branches)
    prev_e, next_e = loop.branches[k - 1], loop.branches[(k + 1) % n]
    # branches[k] joins buses[k] -> buses[k+1]
    if loop.buses[k] == int(net.f[e]):
        return prev_e, next_e
    return next_e, prev_e


def candidate_set(net: Network, e: int, loop: Loop, mean_flow, allowed=None) -> list[int]:
    """Branches worth trying around a minimum-flow branch ``e``.

    ``e`` plus its downstream neighbour when the expected from-end flow is
    positive, or its upstream neighbour when negative.  A neighbour that
    is not in ``allowed`` does not exist.
    """
    if len(loop.branches) < 2:
        return [e]
    up, down = loop_neighbours(loop, e, net)
    p = float(mean_flow[e])
    other = down if p > 0 else up if p < 0 else None
    if other is None or other == e or (allowed is not None and not allowed[other]):
        return [e]
    return sorted({e, other})


# --- results --------------------------------------------------------------

@dataclass
class TraceRow:
    stage: int
    outer: int
    inner: int
    branch: int
    opened: tuple
    loss: float
    index: float
    score: float
    feasible: bool
    chosen: bool = False


@dataclass
class SbrResult:
    alpha_star: np.ndarray
    objective: float
    loss: float
    index: float
    weights: ObjectiveWeights
    trace: list = field(default_factory=list)
    stage1_alpha: np.ndarray | None = None
    stage1_objective: float = np.nan
    outer_iterations: int = 0
    stopped_early: bool = False
    evaluations: int = 0

    @property
    def opened(self) -> tuple:
        return opened_ids(self.alpha_star)

    def to_dict(self) -> dict:
        return {
            "opened": list(self.opened),
            "alpha": [int(a) for a in self.alpha_star],
            "objective": self.objective,
            "loss": self.loss,
            "index": self.index,
            "weights": asdict(self.weights),
            "stage1_opened": None if self.stage1_alpha is None else list(opened_ids(self.stage1_alpha)),
            "stage1_objective": self.stage1_objective,
            "outer_iterations": self.outer_iterations,
            "stopped_early": self.stopped_early,
            "evaluations": self.evaluations,
        }

    def write_json(self, path, extra=None) -> None:
        doc = dict(extra or {})
        doc.update(_jsonable(self.to_dict()))
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    def write_trace_csv(self, path, header_comment=None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["stage", "outer", "inner", "branch", "opened", "loss", "index", "score",
                        "feasible", "chosen"])
            for r in self.trace:
                w.writerow([r.stage, r.outer, r.inner, r.branch, " ".join(map(str, r.opened)),
                            repr(r.loss), repr(r.index), repr(r.score), int(r.feasible), int(r.chosen)])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


# --- normalizers ----------------------------------------------------------

def resolve_weights(weights: ObjectiveWeights, net, alpha, scen, ev: Evaluator, opts=None,
                    meshed=True) -> ObjectiveWeights:
    """Fill in missing normalizers from the operating point at ``alpha``.

    ``C_l_max`` defaults to ten times the expected loss and ``I_v_max`` to
    the largest per-scenario index (exact when available, else the
    evaluator's), with 1.0 as a fallback when that is not positive.
    """
    if weights.resolved:
        return weights
    c_l, sols = expected_loss(net, alpha, scen, opts, meshed)
    C = weights.C_l_max
    if C is None:
        C = C_L_MAX_FACTOR * c_l if c_l > 0 else 1.0
    I = weights.I_v_max
    if I is None:
        if ev.kind == SIGMA_MIN:
            vals = [sigma_min(jacobian(net, alpha, s)) for s in sols]
        else:
            vals = list(scenario_indices(ev, net, alpha, scen, sols))
        I = float(max(vals))
        if not (np.isfinite(I) and I > 0):
            I = 1.0
    return replace(weights, C_l_max=float(C), I_v_max=float(I))


# --- algorithms -----------------------------------------------------------

class _Cache:
    """Evaluations keyed by opened-branch set, shared across SBR calls."""

    def __init__(self, net, scen, weights, ev, opts):
        self.net, self.scen, self.weights, self.ev, self.opts = net, scen, weights, ev, opts
        self.store = {}

    def __call__(self, alpha) -> TopologyEval:
        key = opened_ids(alpha)
        if key not in self.store:
            self.store[key] = evaluate_topology(self.net, alpha, self.scen, self.weights, self.ev, self.opts)
        return self.store[key]


def _single_loop(net, alpha0) -> Loop:
    if not is_connected(net, alpha0):
        raise TopologyError("closed graph is disconnected")
    if int(alpha0.sum()) != net.n_bus:
        raise PreconditionError(
            f"one-stage SBR needs exactly one loop; closed graph has {int(alpha0.sum()) - net.n_bus + 1}"
        )
    return chordless_loops(net, alpha0)[0]


def _one_stage(net, scen, alpha0, cache, opts, stage, outer, inner):
    loop = _single_loop(net, alpha0)
    _, sols = expected_loss(net, alpha0, scen, opts, meshed=True)
    allowed = net.switchable & alpha0
    inj = [loop_injection(net, sols, scen.pi, loop, i) for i in loop.buses]
    mean_flow = expected_flow(sols, scen.pi)
    cands = set()
    for sp in subpaths(loop, inj):
        if not np.any(allowed[sp]):
            continue
        e = min_flow_branch(sp, sols, scen.pi, allowed)
        cands.update(candidate_set(net, e, loop, mean_flow, allowed))
    if not cands:
        raise PreconditionError("loop has no switchable branch")
    rows, best = [], None
    for e in sorted(cands):
        ev = cache(net.with_open([e], alpha0))
        rows.append(TraceRow(stage, outer, inner, e, opened_ids(ev.alpha), ev.loss, ev.index, ev.score, ev.feasible))
        if ev.feasible and (best is None or ev.score < best[1].score):
            best = (len(rows) - 1, ev)
    if best is not None:
        rows[best[0]].chosen = True
    return rows, best


def one_stage_sbr(net: Network, scen, weights: ObjectiveWeights, ev: Evaluator,
                  opts: SolverOptions | None = None, alpha0=None) -> SbrResult:
    """Open one branch of a single-loop network.

    Parameters
    ----------
    alpha0 : bool array, optional
        Starting switch status whose closed graph has exactly one loop;
        defaults to all branches closed.

    Raises
    ------
    PreconditionError
        If the closed graph does not hold exactly one loop.
    NoFeasibleTopologyError
        If every candidate is infeasible.
    """
    alpha0 = net.all_closed() if alpha0 is None else check_alpha(net, alpha0).copy()
    _single_loop(net, alpha0)
    weights.check_orientation(ev.kind)
    weights = resolve_weights(weights, net, alpha0, scen, ev, opts)
    cache = _Cache(net, scen, weights, ev, opts)
    rows, best = _one_stage(net, scen, alpha0, cache, opts, 1, 0, 0)
    if best is None:
        raise NoFeasibleTopologyError("every candidate branch is infeasible")
    ev_best = best[1]
    return SbrResult(ev_best.alpha, ev_best.score, ev_best.loss, ev_best.index, weights, rows,
                     evaluations=len(cache.store))


def _all_equal(values) -> bool:
    v = np.asarray(values, dtype=float)
    if np.all(np.isinf(v)):
        return True
    if not np.all(np.isfinite(v)):
        return False
    return float(np.ptp(v)) <= EQUAL_RTOL * max(float(np.max(np.abs(v))), np.finfo(float).tiny)


def stage_one(net: Network, scen, opts=None) -> list[int]:
    """Open the least-loaded branch of every loop of the all-closed network.

    When an opened branch also lies on a later loop, that loop is replaced
    by its symmetric difference with the current one so it no longer uses
    the opened branch.
    """
    closed = net.all_closed()
    _, sols = expected_loss(net, closed, scen, opts, meshed=True)
    mean_abs = expected_abs_flow(sols, scen.pi)
    loops = [set(lp.branches) for lp in chordless_loops(net, closed)]
    opened = []
    for l, loop in enumerate(loops):
        cand = sorted(e for e in loop if net.switchable[e])
        if not cand:
            raise PreconditionError(f"loop {l} has no switchable branch")
        e = cand[int(np.argmin(mean_abs[cand]))]
        opened.append(e)
        for k in range(l + 1, len(loops)):
            if e in loops[k]:
                loops[k] = loops[k] ^ loop
    return opened


def two_stage_sbr(net: Network, scen, weights: ObjectiveWeights, ev: Evaluator, n_max: int = 5,
                  opts: SolverOptions | None = None) -> SbrResult:
    """Stage-one opening followed by up to ``n_max`` close-and-open sweeps.

    The returned topology minimizes the objective over the stage-one
    configuration and every single-loop re-optimization.

    Raises
    ------
    PreconditionError
        If the network has no loop or a loop has no switchable branch.
    InfeasibleTopologyError
        If the all-closed network has no power-flow solution.
    NoFeasibleTopologyError
        If no visited configuration is feasible.
    """
    if net.n_redundant < 1:
        raise PreconditionError("network is already radial")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    weights.check_orientation(ev.kind)
    opened = stage_one(net, scen, opts)
    stage1_alpha = net.with_open(opened)
    weights = resolve_weights(weights, net, net.all_closed(), scen, ev, opts)
    cache = _Cache(net, scen, weights, ev, opts)

    s1 = cache(stage1_alpha)
    trace = [TraceRow(1, 0, 0, -1, opened_ids(stage1_alpha), s1.loss, s1.index, s1.score, s1.feasible, True)]
    best = s1 if s1.feasible else None

    L = len(opened)
    n_done, early = 0, False
    for n in range(1, n_max + 1):
        gammas = []
        for l in range(L):
            rest = opened[:l] + opened[l + 1:]
            alpha0 = net.with_open(rest)
            try:
                rows, found = _one_stage(net, scen, alpha0, cache, opts, 2, n, l)
            except InfeasibleTopologyError:
                rows, found = [], None
            trace.extend(rows)
            if found is None:
                gammas.append(np.inf)
                continue
            cand = found[1]
            opened[l] = next(e for e in opened_ids(cand.alpha) if e not in rest)
            gammas.append(cand.score)
            if best is None or cand.score < best.score:
                best = cand
        n_done = n
        if _all_equal(gammas):
            early = n < n_max
            break

    if best is None:
        raise NoFeasibleTopologyError("no feasible radial configuration was found")
    return SbrResult(best.alpha, best.score, best.loss, best.index, weights, trace,
                     stage1_alpha, s1.score, n_done, early, len(cache.store))
