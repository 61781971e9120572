"""Fixed-shape encoding of a network state.

One row per branch in branch-id order::

    [i / N, j / N, g_ij, b_ij, p_ij, q_ij, p_j, q_j]

where ``p_ij, q_ij`` are the flows sent from the from-bus ``i`` and
``p_j, q_j`` the injections at the to-bus ``j``.  Rows of open branches are
all zero.
"""

import numpy as np

from ..network import check_alpha

N_FEATURES = 8
COLUMNS = ("i", "j", "g", "b", "p_ij", "q_ij", "p_j", "q_j")


def encode(net, alpha, sol) -> np.ndarray:
    alpha = check_alpha(net, alpha)
    out = np.zeros((net.n_branch, N_FEATURES))
    n = float(net.n_bus)
    out[:, 0] = net.f / n
    out[:, 1] = net.t / n
    out[:, 2] = net.g
    out[:, 3] = net.b
    out[:, 4] = sol.flows[:, 0]
    out[:, 5] = sol.flows[:, 1]
    out[:, 6] = sol.p[net.t]
    out[:, 7] = sol.q[net.t]
    out[~alpha] = 0.0
    return out


def closed_rows(enc) -> np.ndarray:
    """Boolean mask of non-zero (closed-branch) rows; works on batches."""
    return np.any(enc != 0.0, axis=-1)
