"""Labeled (encoding, index) datasets and their on-disk format.

A dataset is stored as two files: ``<stem>.bin`` holds little-endian
float64 rows of ``E * 8`` encoding values, the target and the train flag;
``<stem>.json`` is the sidecar with the format tag, shapes and column names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyDatasetError
from ..network import check_alpha
from ..powerflow import SolverOptions, jacobian, sigma_min, solve_pf
from ..stability import KINDS, SIGMA_MIN, IndexKind
from .encoding import COLUMNS, N_FEATURES, encode

FORMAT = "sdnrvs-dataset/1"


@dataclass
class LabeledDataset:
    """Encodings ``X`` of shape ``(n, E, 8)``, targets ``y`` and a train mask."""

    X: np.ndarray
    y: np.ndarray
    train: np.ndarray
    kind: IndexKind = SIGMA_MIN

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.train = np.asarray(self.train, dtype=bool)
        if self.X.ndim != 3 or self.X.shape[2] != N_FEATURES:
            raise ValueError(f"encodings must have shape (n, E, {N_FEATURES}), got {self.X.shape}")
        if not (len(self.X) == len(self.y) == len(self.train)):
            raise ValueError("encodings, targets and split mask differ in length")

    def __len__(self):
        return len(self.y)

    @property
    def test(self) -> np.ndarray:
        return ~self.train


def split_groups(X, train_fraction=0.7, seed=0) -> np.ndarray:
    """Train mask that keeps identical encodings on the same side."""
    keys = [x.tobytes() for x in np.ascontiguousarray(X)]
    uniq = {}
    group = np.array([uniq.setdefault(k, len(uniq)) for k in keys])
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(uniq))
    n_train = int(round(train_fraction * len(uniq)))
    train_groups = np.zeros(len(uniq), dtype=bool)
    train_groups[perm[:n_train]] = True
    return train_groups[group]


def generate_dataset(net, configs, samples, opts: SolverOptions | None = None,
                     samples_per_config: int | None = None, seed: int = 0,
                     train_fraction: float = 0.7) -> LabeledDataset:
    """Solve and label (configuration, sample) pairs with the exact index.

    Parameters
    ----------
    configs : sequence of bool arrays
        Radial switch statuses.
    samples : sequence of Sample
    samples_per_config : int, optional
        Draw this many samples per configuration at random instead of
        taking the full cross product.

    Pairs whose power flow fails to converge are skipped.

    Raises
    ------
    EmptyDatasetError
        If no pair converges.
    """
    rng = np.random.default_rng(seed)
    X, y = [], []
    for alpha in configs:
        alpha = check_alpha(net, alpha)
        if samples_per_config is None:
            chosen = range(len(samples))
        else:
            chosen = rng.choice(len(samples), size=samples_per_config, replace=samples_per_config > len(samples))
        for s in chosen:
            sol = solve_pf(net, alpha, samples[s], opts)
            if not sol.converged:
                continue
            X.append(encode(net, alpha, sol))
            y.append(sigma_min(jacobian(net, alpha, sol)))
    if not X:
        raise EmptyDatasetError("no (configuration, sample) pair converged")
    X = np.stack(X)
    return LabeledDataset(X, np.array(y), split_groups(X, train_fraction, seed), SIGMA_MIN)


def _stem(path):
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".bin", ".json") else p


def save_dataset(data: LabeledDataset, path, extra=None) -> tuple[Path, Path]:
    """Write ``<stem>.bin`` and ``<stem>.json``; returns both paths."""
    stem = _stem(path)
    n, E, F = data.X.shape
    rows = np.concatenate([data.X.reshape(n, E * F), data.y[:, None], data.train[:, None].astype(float)], axis=1)
    bin_path, json_path = stem.with_suffix(".bin"), stem.with_suffix(".json")
    rows.astype("<f8").tofile(bin_path)
    meta = {
        "format": FORMAT,
        "rows": n,
        "n_branch": E,
        "features": list(COLUMNS),
        "row_layout": "encoding (branch-major, n_branch x features), target, is_train",
        "dtype": "<f8",
        "target_kind": data.kind.name,
        "data_file": bin_path.name,
    }
    if extra:
        meta["provenance"] = extra
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return bin_path, json_path


def load_dataset(path) -> LabeledDataset:
    stem = _stem(path)
    json_path = stem.with_suffix(".json")
    with open(json_path) as fh:
        meta = json.load(fh)
    if meta.get("format") != FORMAT:
        raise ValueError(f"unsupported dataset format {meta.get('format')!r}")
    n, E = int(meta["rows"]), int(meta["n_branch"])
    F = len(meta["features"])
    raw = np.fromfile(json_path.parent / meta["data_file"], dtype=meta["dtype"])
    if raw.size != n * (E * F + 2):
        raise ValueError(f"data file holds {raw.size} values, sidecar implies {n * (E * F + 2)}")
    rows = raw.reshape(n, E * F + 2)
    return LabeledDataset(rows[:, :E * F].reshape(n, E, F), rows[:, -2], rows[:, -1] > 0.5,
                          KINDS[meta["target_kind"]])
