"""Ground-truth machinery for tests and acceptance runs.

``bfs_sweep_pf`` is a complex-phasor backward/forward sweep that shares no
numerical code with the Newton-Raphson solver.  ``brute_force_optimum``
scores every radial configuration with the exact stability evaluator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, TopologyError
from .network import Network, bfs_tree, check_alpha, enumerate_radial, is_radial, opened_ids
from .powerflow import PowerFlowSolution, SolverOptions
from .scenario import Sample, net_injections


def bfs_sweep_pf(net: Network, alpha, sample: Sample, opts: SolverOptions | None = None) -> PowerFlowSolution:
    """Backward/forward sweep power flow on a radial configuration.

    Iterates until the largest voltage update falls below
    ``opts.tolerance * 1e-2``; the returned ``max_mismatch`` is the final
    power mismatch at the non-slack buses.
    """
    opts = opts or SolverOptions()
    alpha = check_alpha(net, alpha).copy()
    if not is_radial(net, alpha):
        raise TopologyError("backward/forward sweep requires a radial configuration")
    order, parent, pbranch = bfs_tree(net, alpha)
    p, q = net_injections(sample, net)
    s_inj = p + 1j * q
    z = np.zeros(net.n_bus, dtype=complex)
    for u in order[1:]:
        br = net.branches[pbranch[u]]
        z[u] = 1.0 / complex(br.g, br.b)
    V = np.ones(net.n_bus, dtype=complex)
    converged = False
    it = 0
    for it in range(1, 20 * opts.max_iterations + 1):
        # current drawn from the network at each bus
        inj = -np.conj(s_inj / V)
        I = inj.copy()
        for u in reversed(order[1:]):
            I[parent[u]] += I[u]
        Vn = V.copy()
        for u in order[1:]:
            Vn[u] = Vn[parent[u]] - z[u] * I[u]
        step = np.max(np.abs(Vn - V))
        V = Vn
        if not np.all(np.isfinite(V)):
            break
        if step < opts.tolerance * 1e-2:
            converged = True
            break

    flows = np.zeros((net.n_branch, 4))
    for u in order[1:]:
        k = pbranch[u]
        y = complex(net.branches[k].g, net.branches[k].b)
        i, j = int(net.f[k]), int(net.t[k])
        s_ij = V[i] * np.conj((V[i] - V[j]) * y)
        s_ji = V[j] * np.conj((V[j] - V[i]) * y)
        flows[k] = s_ij.real, s_ij.imag, s_ji.real, s_ji.imag
    s_calc = np.zeros(net.n_bus, dtype=complex)
    np.add.at(s_calc, net.f, flows[:, 0] + 1j * flows[:, 1])
    np.add.at(s_calc, net.t, flows[:, 2] + 1j * flows[:, 3])
    slack = net.substation
    others = [k for k in range(net.n_bus) if k != slack]
    mism = float(np.max(np.abs(np.concatenate([(s_calc - s_inj).real[others], (s_calc - s_inj).imag[others]]))))
    # series loss |I|^2 r, independent of the injection sum
    loss = 0.0
    for u in order[1:]:
        loss += abs(I[u]) ** 2 * z[u].real
    p_out = p.copy()
    q_out = q.copy()
    p_out[slack] = s_calc[slack].real
    q_out[slack] = s_calc[slack].imag
    return PowerFlowSolution(alpha, np.abs(V), np.angle(V), p_out, q_out, flows,
                             float(p_out[slack]), float(q_out[slack]), float(loss),
                             converged and mism <= max(opts.tolerance, 1e-6), it, mism, "sweep")


@dataclass
class OracleRow:
    config: int
    opened: tuple[int, ...]
    objective: float
    loss: float
    index: float
    feasible: bool


@dataclass
class OracleReport:
    best_alpha: np.ndarray | None
    best_objective: float
    rows: list[OracleRow] = field(default_factory=list)
    infeasible: int = 0

    def write_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["config", "opened", "objective", "loss", "index", "feasible"])
            for r in self.rows:
                w.writerow([r.config, " ".join(map(str, r.opened)), repr(r.objective),
                            repr(r.loss), repr(r.index), int(r.feasible)])


def brute_force_optimum(net, scen, weights, evaluator, opts=None, cap=None) -> OracleReport:
    """Exhaustively score every radial configuration.

    ``weights`` must carry both normalizers.  Infeasible configurations
    (non-convergence or any limit violation) are kept in the table with
    ``feasible=False`` and excluded from the optimum.

    Raises
    ------
    EnumerationTruncated
        If more than ``cap`` radial configurations exist.
    """
    from .reconfig import evaluate_topology

    if not evaluator.is_exact:
        raise PreconditionError("the oracle uses the exact evaluator only")
    if weights.C_l_max is None or weights.I_v_max is None:
        raise PreconditionError("oracle weights need explicit C_l_max and I_v_max")
    report = OracleReport(None, np.inf)
    for cid, alpha in enumerate(enumerate_radial(net, cap)):
        ev = evaluate_topology(net, alpha, scen, weights, evaluator, opts)
        row = OracleRow(cid, opened_ids(alpha), ev.score, ev.loss, ev.index, ev.feasible)
        report.rows.append(row)
        if not ev.feasible:
            report.infeasible += 1
        elif ev.score < report.best_objective:
            report.best_objective = ev.score
            report.best_alpha = alpha
    return report
