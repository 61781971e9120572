"""Static network description, radiality checks, loops and radial enumeration.

A switch status ``alpha`` is a boolean numpy vector aligned with
``Network.branches`` (``True`` = closed).  Networks are immutable; the numpy
views exposed as cached properties are marked read-only.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import CaseFormatError, DimensionError, EnumerationTruncated, TopologyError

SUBSTATION = "substation"
NON_SUBSTATION = "non-substation"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = NON_SUBSTATION
    v_min: float = 0.9
    v_max: float = 1.1
    p_min: float | None = None
    p_max: float | None = None
    q_min: float | None = None
    q_max: float | None = None
    name: str | None = None

    @property
    def is_substation(self) -> bool:
        return self.kind == SUBSTATION


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    g: float
    b: float
    s_max: float = math.inf
    switchable: bool = True

    @property
    def admittance(self) -> complex:
        return complex(self.g, self.b)


@dataclass(frozen=True)
class Loop:
    """A cycle given as parallel bus and branch sequences.

    ``branches[k]`` joins ``buses[k]`` and ``buses[(k + 1) % n]``.
    """

    buses: tuple[int, ...]
    branches: tuple[int, ...]

    def __len__(self):
        return len(self.branches)


def _validate(buses, branches):
    n = len(buses)
    if n < 1:
        raise CaseFormatError("network has no buses")
    for k, bus in enumerate(buses):
        if bus.id != k:
            raise CaseFormatError(f"bus ids must be contiguous 0..N-1; position {k} has id {bus.id}")
        if bus.kind not in (SUBSTATION, NON_SUBSTATION):
            raise CaseFormatError(f"bus {k}: unknown kind {bus.kind!r}")
        if not bus.v_min < bus.v_max:
            raise CaseFormatError(f"bus {k}: v_min must be below v_max")
    subs = [bus.id for bus in buses if bus.is_substation]
    if len(subs) != 1:
        raise CaseFormatError(f"exactly one substation bus required, found {len(subs)}")
    seen = set()
    for k, br in enumerate(branches):
        if br.id != k:
            raise CaseFormatError(f"branch ids must be contiguous; position {k} has id {br.id}")
        if br.from_bus == br.to_bus:
            raise CaseFormatError(f"branch {k}: self loop at bus {br.from_bus}")
        if not (0 <= br.from_bus < n and 0 <= br.to_bus < n):
            raise CaseFormatError(f"branch {k}: endpoint out of range")
        if br.g == 0 and br.b == 0:
            raise CaseFormatError(f"branch {k}: zero series admittance")
        if br.g < 0:
            raise CaseFormatError(f"branch {k}: negative conductance")
        pair = frozenset((br.from_bus, br.to_bus))
        if pair in seen:
            raise CaseFormatError(f"branch {k}: duplicate bus pair {sorted(pair)}")
        seen.add(pair)


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        _validate(self.buses, self.branches)
        if not _connected(self.n_bus, self.f, self.t, np.ones(self.n_branch, bool)):
            raise TopologyError("the all-closed network is not connected")

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_redundant(self) -> int:
        """Number of redundant branches, ``|E| - (N - 1)``."""
        return self.n_branch - (self.n_bus - 1)

    @cached_property
    def substation(self) -> int:
        return next(bus.id for bus in self.buses if bus.is_substation)

    @cached_property
    def f(self) -> np.ndarray:
        return _frozen(np.array([br.from_bus for br in self.branches], dtype=np.intp))

    @cached_property
    def t(self) -> np.ndarray:
        return _frozen(np.array([br.to_bus for br in self.branches], dtype=np.intp))

    @cached_property
    def g(self) -> np.ndarray:
        return _frozen(np.array([br.g for br in self.branches], dtype=float))

    @cached_property
    def b(self) -> np.ndarray:
        return _frozen(np.array([br.b for br in self.branches], dtype=float))

    @cached_property
    def s_max(self) -> np.ndarray:
        return _frozen(np.array([br.s_max for br in self.branches], dtype=float))

    @cached_property
    def switchable(self) -> np.ndarray:
        return _frozen(np.array([br.switchable for br in self.branches], dtype=bool))

    @cached_property
    def v_min(self) -> np.ndarray:
        return _frozen(np.array([bus.v_min for bus in self.buses], dtype=float))

    @cached_property
    def v_max(self) -> np.ndarray:
        return _frozen(np.array([bus.v_max for bus in self.buses], dtype=float))

    def all_closed(self) -> np.ndarray:
        return np.ones(self.n_branch, dtype=bool)

    def with_open(self, opened, alpha=None) -> np.ndarray:
        """Switch status with the branch ids in ``opened`` open.

        Starts from ``alpha`` when given, else from the all-closed status.
        """
        out = self.all_closed() if alpha is None else check_alpha(self, alpha).copy()
        out[list(opened)] = False
        return out

    def find_branch(self, i: int, j: int) -> int:
        for br in self.branches:
            if {br.from_bus, br.to_bus} == {i, j}:
                return br.id
        raise KeyError(f"no branch between buses {i} and {j}")

    def without_branch(self, branch_id: int) -> "Network":
        """A copy of the network with one branch deleted and ids renumbered."""
        kept = [br for br in self.branches if br.id != branch_id]
        renum = [
            Branch(k, br.from_bus, br.to_bus, br.g, br.b, br.s_max, br.switchable)
            for k, br in enumerate(kept)
        ]
        return Network(self.buses, tuple(renum), self.base_mva, self.name)


def _frozen(a):
    a.setflags(write=False)
    return a


def check_alpha(net: Network, alpha) -> np.ndarray:
    """Validate and coerce a switch status vector."""
    a = np.asarray(alpha)
    if a.ndim != 1 or a.shape[0] != net.n_branch:
        raise DimensionError(f"switch status has shape {a.shape}, network has {net.n_branch} branches")
    return a.astype(bool, copy=False)


def opened_ids(alpha) -> tuple[int, ...]:
    return tuple(int(k) for k in np.flatnonzero(~np.asarray(alpha, dtype=bool)))


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x, y) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True


def _connected(n, f, t, alpha):
    ds = _DisjointSet(n)
    comps = n
    for k in np.flatnonzero(alpha):
        if ds.union(int(f[k]), int(t[k])):
            comps -= 1
    return comps == 1


def is_connected(net: Network, alpha) -> bool:
    """True when every bus is reachable over closed branches."""
    alpha = check_alpha(net, alpha)
    return _connected(net.n_bus, net.f, net.t, alpha)


def is_radial(net: Network, alpha) -> bool:
    """True iff the closed-branch graph is a tree spanning every bus."""
    alpha = check_alpha(net, alpha)
    if int(alpha.sum()) != net.n_bus - 1:
        return False
    return _connected(net.n_bus, net.f, net.t, alpha)


def adjacency(net: Network, alpha=None) -> list[list[tuple[int, int]]]:
    """Per-bus ``(neighbor, branch id)`` lists over closed branches, by branch id."""
    alpha = net.all_closed() if alpha is None else check_alpha(net, alpha)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(net.n_bus)]
    for k in np.flatnonzero(alpha):
        i, j = int(net.f[k]), int(net.t[k])
        adj[i].append((j, int(k)))
        adj[j].append((i, int(k)))
    return adj


def bfs_tree(net: Network, alpha=None):
    """Breadth-first spanning tree of the closed graph rooted at the substation.

    Returns
    -------
    order : list of int
        Buses in visiting order (root first).
    parent : list of int
        Parent bus, ``-1`` for the root.
    parent_branch : list of int
        Branch joining a bus to its parent, ``-1`` for the root.
    """
    adj = adjacency(net, alpha)
    root = net.substation
    parent = [-2] * net.n_bus
    parent_branch = [-1] * net.n_bus
    parent[root] = -1
    order = [root]
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, k in adj[u]:
            if parent[v] == -2:
                parent[v] = u
                parent_branch[v] = k
                order.append(v)
                queue.append(v)
    if len(order) != net.n_bus:
        raise TopologyError(f"closed graph is disconnected: {net.n_bus - len(order)} buses unreachable")
    return order, parent, parent_branch


def chordless_loops(net: Network, alpha=None) -> list[Loop]:
    """Fundamental cycle basis of the closed graph w.r.t. a BFS tree.

    Each loop holds exactly one non-tree branch; loops are returned in
    ascending order of that branch id.  The bus sequence starts at the
    loop bus nearest to the substation.
    """
    alpha = net.all_closed() if alpha is None else check_alpha(net, alpha)
    order, parent, parent_branch = bfs_tree(net, alpha)
    depth = [0] * net.n_bus
    for u in order[1:]:
        depth[u] = depth[parent[u]] + 1
    tree = set(k for k in parent_branch if k >= 0)
    loops = []
    for k in np.flatnonzero(alpha):
        k = int(k)
        if k in tree:
            continue
        u, v = int(net.f[k]), int(net.t[k])
        up_u, up_v = [u], [v]
        a, b = u, v
        while a != b:
            if depth[a] >= depth[b]:
                a = parent[a]
                up_u.append(a)
            else:
                b = parent[b]
                up_v.append(b)
        # up_u ends at the common ancestor; up_v ends there too
        down_u = up_u[::-1]
        side_v = up_v[:-1]
        buses = down_u + side_v
        branches = [parent_branch[x] for x in down_u[1:]] + [k] + [parent_branch[x] for x in side_v]
        loops.append(Loop(tuple(buses), tuple(branches)))
    return loops


def loop_from_edges(net: Network, edges) -> Loop:
    """Order an edge set forming a simple cycle into a :class:`Loop`."""
    edges = sorted(set(int(e) for e in edges))
    inc: dict[int, list[int]] = {}
    for e in edges:
        for x in (int(net.f[e]), int(net.t[e])):
            inc.setdefault(x, []).append(e)
    if not edges or any(len(v) != 2 for v in inc.values()):
        raise TopologyError("edge set is not a simple cycle")
    start = min(inc)
    buses, branches = [start], []
    cur, e = start, min(inc[start])
    while True:
        nxt = int(net.t[e]) if int(net.f[e]) == cur else int(net.f[e])
        branches.append(e)
        if nxt == start:
            break
        buses.append(nxt)
        a, b = inc[nxt]
        cur, e = nxt, (b if a == e else a)
    if len(branches) != len(edges):
        raise TopologyError("edge set is not a single cycle")
    return Loop(tuple(buses), tuple(branches))


def cycle_masks(net: Network) -> np.ndarray:
    """Per-branch bitmask of the fundamental loops that contain it."""
    masks = np.zeros(net.n_branch, dtype=np.int64)
    for bit, loop in enumerate(chordless_loops(net)):
        for e in loop.branches:
            masks[e] |= 1 << bit
    return masks


def enumerate_radial(net: Network, cap: int | None = None) -> Iterator[np.ndarray]:
    """Yield every radial switch status exactly once.

    Opened-branch sets of size ``L`` are visited in lexicographic order of
    branch ids.  A set is accepted when its removal leaves the network a
    spanning tree, tested as GF(2) independence of the fundamental-loop
    incidence masks of its branches; prefixes that are already dependent
    are pruned.  Branches in no loop and non-switchable branches are never
    opened.

    Raises
    ------
    EnumerationTruncated
        After ``cap`` configurations have been yielded and another exists.
    """
    L = net.n_redundant
    masks = cycle_masks(net)
    cand = [k for k in range(net.n_branch) if masks[k] and net.switchable[k]]
    count = 0
    chosen: list[int] = []

    def reduce(basis, m):
        for piv, vec in basis:
            if m >> piv & 1:
                m ^= vec
        return m

    def rec(start, basis):
        nonlocal count
        if len(chosen) == L:
            if cap is not None and count >= cap:
                raise EnumerationTruncated(count)
            count += 1
            yield net.with_open(chosen)
            return
        need = L - len(chosen)
        for pos in range(start, len(cand) - need + 1):
            k = cand[pos]
            m = reduce(basis, int(masks[k]))
            if m == 0:
                continue
            piv = m.bit_length() - 1
            chosen.append(k)
            yield from rec(pos + 1, basis + [(piv, m)])
            chosen.pop()

    if L == 0:
        yield net.all_closed()
        return
    yield from rec(0, [])


def random_radial(net: Network, rng) -> np.ndarray:
    """A random radial switch status (Kruskal on random weights).

    Non-switchable branches are always kept closed.  Not uniform over
    spanning trees, but every radial configuration has positive probability.
    """
    order = np.lexsort((rng.random(net.n_branch), net.switchable))
    ds = _DisjointSet(net.n_bus)
    alpha = np.zeros(net.n_branch, dtype=bool)
    for k in order:
        if ds.union(int(net.f[k]), int(net.t[k])):
            alpha[k] = True
    if int(alpha.sum()) != net.n_bus - 1 or not np.all(alpha[~net.switchable]):
        raise TopologyError("no radial configuration keeps every non-switchable branch closed")
    return alpha


def count_spanning_trees(net: Network) -> int:
    """Number of spanning trees via the matrix-tree theorem."""
    n = net.n_bus
    lap = np.zeros((n, n))
    for i, j in zip(net.f, net.t):
        lap[i, i] += 1
        lap[j, j] += 1
        lap[i, j] -= 1
        lap[j, i] -= 1
    keep = [k for k in range(n) if k != net.substation]
    sign, logdet = np.linalg.slogdet(lap[np.ix_(keep, keep)])
    return int(round(sign * math.exp(logdet)))


# --- case files -----------------------------------------------------------

def network_to_dict(net: Network) -> dict:
    buses = []
    for bus in net.buses:
        d = {"id": bus.id, "kind": bus.kind, "v_min": bus.v_min, "v_max": bus.v_max}
        for key in ("p_min", "p_max", "q_min", "q_max"):
            val = getattr(bus, key)
            if val is not None:
                d[key] = val
        if bus.name is not None:
            d["name"] = bus.name
        buses.append(d)
    branches = []
    for br in net.branches:
        d = {"id": br.id, "from": br.from_bus, "to": br.to_bus, "g": br.g, "b": br.b}
        if math.isfinite(br.s_max):
            d["s_max"] = br.s_max
        if not br.switchable:
            d["switchable"] = False
        branches.append(d)
    out = {"base_mva": net.base_mva, "buses": buses, "branches": branches}
    if net.name:
        out["name"] = net.name
    return out


def network_from_dict(doc: dict) -> Network:
    try:
        buses = [
            Bus(
                id=int(d["id"]),
                kind=d.get("kind", NON_SUBSTATION),
                v_min=float(d.get("v_min", 0.9)),
                v_max=float(d.get("v_max", 1.1)),
                p_min=_opt(d.get("p_min")),
                p_max=_opt(d.get("p_max")),
                q_min=_opt(d.get("q_min")),
                q_max=_opt(d.get("q_max")),
                name=d.get("name"),
            )
            for d in doc["buses"]
        ]
        branches = [
            Branch(
                id=int(d["id"]),
                from_bus=int(d["from"]),
                to_bus=int(d["to"]),
                g=float(d["g"]),
                b=float(d["b"]),
                s_max=float(d.get("s_max", math.inf)),
                switchable=bool(d.get("switchable", True)),
            )
            for d in doc["branches"]
        ]
        base = float(doc.get("base_mva", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseFormatError(f"malformed case document: {exc!r}") from exc
    return Network(tuple(buses), tuple(branches), base, doc.get("name", ""))


def _opt(x):
    return None if x is None else float(x)


def load_network(path) -> Network:
    """Read a JSON case file, or a bundled case by name (``"ieee33"``)."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        bundled = Path(__file__).parent / "cases" / f"{path}.json"
        if bundled.exists():
            p = bundled
    with open(p) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseFormatError(f"{p}: line {exc.lineno}: {exc.msg}") from exc
    return network_from_dict(doc)


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, indent=1)
        fh.write("\n")


def bundled_case(name: str) -> Network:
    """Load one of the bundled cases: ``"ieee33"`` or ``"ieee123"``."""
    return load_network(Path(__file__).parent / "cases" / f"{name}.json")
