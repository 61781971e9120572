"""AC power flow on a switch configuration.

With one slack substation and fixed PQ injections at every other bus the
per-scenario loss-minimizing OPF has a single feasible point, so the
stochastic OPF of a fixed topology reduces to one Newton-Raphson solve per
scenario followed by post-hoc limit checks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleTopologyError, NumericError, PreconditionError, TopologyError
from .network import Network, check_alpha, is_connected, is_radial
from .scenario import Sample, ScenarioSet, net_injections

SLACK_VOLTAGE = 1.0


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-8
    max_iterations: int = 50
    flat_start: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class PowerFlowSolution:
    """Operating point of one scenario on one topology.

    ``flows`` has one row ``(p_ij, q_ij, p_ji, q_ji)`` per branch, zero for
    open branches.  ``p`` and ``q`` are the bus injections implied by the
    solved state (equal to the specified ones up to ``max_mismatch``), with
    the substation entry equal to ``(sub_p, sub_q)``.
    """

    alpha: np.ndarray
    V: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray
    flows: np.ndarray
    sub_p: float
    sub_q: float
    loss: float
    converged: bool
    iterations: int
    max_mismatch: float
    method: str = field(default="newton", compare=False)


@dataclass(frozen=True)
class Violation:
    kind: str
    element: int
    magnitude: float


def branch_flows(net: Network, alpha, V, theta) -> np.ndarray:
    """Active and reactive flows at both ends of every branch.

    Returns an ``(E, 4)`` array of ``p_ij, q_ij, p_ji, q_ji`` where ``i`` is
    the branch's from-bus; open branches give zero rows.
    """
    a = check_alpha(net, alpha).astype(float)
    V = np.asarray(V, dtype=float)
    theta = np.asarray(theta, dtype=float)
    i, j, g, b = net.f, net.t, net.g, net.b
    vi, vj = V[i], V[j]
    th = theta[i] - theta[j]
    s, c = np.sin(th), np.cos(th)
    vv = vi * vj
    out = np.empty((net.n_branch, 4))
    out[:, 0] = a * (vi * vi * g - vv * (b * s + g * c))
    out[:, 1] = a * (-vi * vi * b - vv * (g * s - b * c))
    # theta_ji = -theta_ij
    out[:, 2] = a * (vj * vj * g - vv * (-b * s + g * c))
    out[:, 3] = a * (-vj * vj * b - vv * (-g * s - b * c))
    return out


def bus_injections(net: Network, alpha, V, theta):
    """Bus injections as the sum of flows sent to adjacent buses."""
    fl = branch_flows(net, alpha, V, theta)
    p = np.zeros(net.n_bus)
    q = np.zeros(net.n_bus)
    np.add.at(p, net.f, fl[:, 0])
    np.add.at(q, net.f, fl[:, 1])
    np.add.at(p, net.t, fl[:, 2])
    np.add.at(q, net.t, fl[:, 3])
    return p, q


def admittance_matrix(net: Network, alpha) -> np.ndarray:
    """Dense bus admittance matrix of the closed branches (no shunts)."""
    alpha = check_alpha(net, alpha)
    y = (net.g + 1j * net.b) * alpha
    Y = np.zeros((net.n_bus, net.n_bus), dtype=complex)
    np.add.at(Y, (net.f, net.f), y)
    np.add.at(Y, (net.t, net.t), y)
    np.add.at(Y, (net.f, net.t), -y)
    np.add.at(Y, (net.t, net.f), -y)
    return Y


def _dS(Y, Vc):
    """Partials of complex injections w.r.t. angle and magnitude."""
    Ibus = Y @ Vc
    Vnorm = Vc / np.abs(Vc)
    diagV = np.diag(Vc)
    dS_dth = 1j * diagV @ np.conj(np.diag(Ibus) - Y * Vc[None, :])
    dS_dV = diagV @ np.conj(Y * Vnorm[None, :]) + np.diag(np.conj(Ibus) * Vnorm)
    return dS_dth, dS_dV


def _assemble(dS_dth, dS_dV, idx):
    sub = np.ix_(idx, idx)
    return np.block([
        [dS_dth[sub].real, dS_dV[sub].real],
        [dS_dth[sub].imag, dS_dV[sub].imag],
    ])


def solve_pf(net: Network, alpha, sample: Sample, opts: SolverOptions | None = None,
             meshed: bool = False) -> PowerFlowSolution:
    """Newton-Raphson power flow with the substation as slack.

    Parameters
    ----------
    meshed : bool
        Permit a non-radial (but connected) closed graph.

    Raises
    ------
    TopologyError
        If the closed graph is disconnected.
    PreconditionError
        If the closed graph has a loop and ``meshed`` is false.

    A failure to converge is not an error: the returned solution has
    ``converged=False``.
    """
    opts = opts or SolverOptions()
    alpha = check_alpha(net, alpha).copy()
    if not is_connected(net, alpha):
        raise TopologyError("closed-branch graph is disconnected")
    if not meshed and not is_radial(net, alpha):
        raise PreconditionError("topology is not radial; pass meshed=True to solve it anyway")
    p_spec, q_spec = net_injections(sample, net)
    slack = net.substation
    pq = np.array([k for k in range(net.n_bus) if k != slack], dtype=np.intp)
    npq = len(pq)
    Y = admittance_matrix(net, alpha)
    V = np.ones(net.n_bus)
    theta = np.zeros(net.n_bus)
    V[slack] = SLACK_VOLTAGE

    converged = False
    err = np.inf
    it = 0
    while True:
        Vc = V * np.exp(1j * theta)
        S = Vc * np.conj(Y @ Vc)
        mis = np.concatenate([p_spec[pq] - S.real[pq], q_spec[pq] - S.imag[pq]])
        err = float(np.max(np.abs(mis))) if npq else 0.0
        if not np.isfinite(err):
            break
        if err <= opts.tolerance:
            converged = True
            break
        if it >= opts.max_iterations:
            break
        J = _assemble(*_dS(Y, Vc), pq)
        try:
            dx = np.linalg.solve(J, mis)
        except np.linalg.LinAlgError:
            break
        theta[pq] += dx[:npq]
        V[pq] += dx[npq:]
        it += 1
        if np.any(V[pq] <= 0) or not np.all(np.isfinite(V)):
            break
    return _finish(net, alpha, V, theta, p_spec, q_spec, converged, it, err, "newton")


def _finish(net, alpha, V, theta, p_spec, q_spec, converged, iterations, err, method):
    # injections are recomputed from the state, so the loss is exactly the
    # series loss at (V, theta) and not off by the residual mismatch
    flows = branch_flows(net, alpha, V, theta)
    p, q = bus_injections(net, alpha, V, theta)
    slack = net.substation
    loss = float(p.sum())
    return PowerFlowSolution(alpha, V, theta, p, q, flows, float(p[slack]), float(q[slack]),
                             loss, converged, iterations, err, method)


def solve_scenarios(net, alpha, scen: ScenarioSet, opts=None, meshed=False):
    return [solve_pf(net, alpha, s, opts, meshed) for s in scen.scenarios]


def expected_loss(net: Network, alpha, scen: ScenarioSet, opts=None, meshed=False):
    """Probability-weighted total loss over the scenarios.

    Returns
    -------
    value : float
    sols : list of PowerFlowSolution
        One per scenario, in scenario order.

    Raises
    ------
    InfeasibleTopologyError
        If any scenario fails to converge; ``.scenario`` holds its index.
    """
    sols = solve_scenarios(net, alpha, scen, opts, meshed)
    for w, sol in enumerate(sols):
        if not sol.converged:
            raise InfeasibleTopologyError(f"power flow did not converge in scenario {w}", scenario=w)
    losses = np.array([s.loss for s in sols])
    return float(scen.pi @ losses), sols


def check_limits(sol: PowerFlowSolution, net: Network) -> list[Violation]:
    """Voltage, apparent-flow and substation-import limit violations."""
    out = []
    for k in range(net.n_bus):
        v = sol.V[k]
        if v < net.v_min[k]:
            out.append(Violation("v_min", k, float(net.v_min[k] - v)))
        elif v > net.v_max[k]:
            out.append(Violation("v_max", k, float(v - net.v_max[k])))
    fl = sol.flows
    s_from = np.hypot(fl[:, 0], fl[:, 1])
    s_to = np.hypot(fl[:, 2], fl[:, 3])
    s = np.maximum(s_from, s_to)
    for k in np.flatnonzero(sol.alpha & (s * s > net.s_max * net.s_max)):
        out.append(Violation("s_max", int(k), float(s[k] - net.s_max[k])))
    sub = net.buses[net.substation]
    for kind, val, lo, hi in (("p", sol.sub_p, sub.p_min, sub.p_max), ("q", sol.sub_q, sub.q_min, sub.q_max)):
        if lo is not None and val < lo:
            out.append(Violation(f"{kind}_min", net.substation, float(lo - val)))
        if hi is not None and val > hi:
            out.append(Violation(f"{kind}_max", net.substation, float(val - hi)))
    return out


def jacobian(net: Network, alpha, sol: PowerFlowSolution) -> np.ndarray:
    """Polar power-flow Jacobian at ``sol`` with the slack row/column removed.

    Columns are ordered angle partials then magnitude partials; rows are
    active then reactive injections, each over the non-slack buses in id
    order.
    """
    if not sol.converged:
        raise PreconditionError("Jacobian requested at an unconverged solution")
    Y = admittance_matrix(net, alpha)
    Vc = sol.V * np.exp(1j * sol.theta)
    pq = np.array([k for k in range(net.n_bus) if k != net.substation], dtype=np.intp)
    return _assemble(*_dS(Y, Vc), pq)


def sigma_min(J) -> float:
    """Smallest singular value of ``J``."""
    J = np.asarray(J, dtype=float)
    if not np.all(np.isfinite(J)):
        raise NumericError("matrix has non-finite entries")
    if J.size == 0:
        return 0.0
    return float(np.linalg.svd(J, compute_uv=False)[-1])


# --- reports --------------------------------------------------------------

def solution_to_dict(sol: PowerFlowSolution, net: Network) -> dict:
    return {
        "converged": sol.converged,
        "iterations": sol.iterations,
        "max_mismatch": sol.max_mismatch,
        "V": sol.V.tolist(),
        "theta": sol.theta.tolist(),
        "sub_p": sol.sub_p,
        "sub_q": sol.sub_q,
        "loss": sol.loss,
        "flows": [
            {"branch": int(k), "p_ij": r[0], "q_ij": r[1], "p_ji": r[2], "q_ji": r[3]}
            for k, r in zip(np.flatnonzero(sol.alpha), sol.flows[sol.alpha].tolist())
        ],
        "violations": [v.__dict__ for v in check_limits(sol, net)] if sol.converged else [],
    }


def write_solution_json(path, sol, net, extra=None):
    doc = dict(extra or {})
    doc.update(solution_to_dict(sol, net))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def write_summary_csv(path, rows, header_comment=None):
    """Rows of ``(scenario, loss, sigma_min, n_violations)``."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["scenario", "loss", "sigma_min", "violations"])
        for r in rows:
            w.writerow([r[0], repr(float(r[1])), repr(float(r[2])), r[3]])
