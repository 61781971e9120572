"""Voltage-stability index evaluation, exact or surrogate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionError, PreconditionError
from .powerflow import jacobian, sigma_min

HIGHER_IS_STABLE = "higher-is-stable"
LOWER_IS_STABLE = "lower-is-stable"


@dataclass(frozen=True)
class IndexKind:
    name: str
    orientation: str

    def __post_init__(self):
        if self.orientation not in (HIGHER_IS_STABLE, LOWER_IS_STABLE):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def stable_sign(self) -> int:
        """Sign the objective weight must carry for this index (+1 or -1)."""
        return -1 if self.orientation == HIGHER_IS_STABLE else 1


SIGMA_MIN = IndexKind("sigma_min", HIGHER_IS_STABLE)
# labels produced outside this package, e.g. RVSI from dynamic simulation
EXTERNAL = IndexKind("external", LOWER_IS_STABLE)

KINDS = {SIGMA_MIN.name: SIGMA_MIN, EXTERNAL.name: EXTERNAL}


@dataclass(frozen=True)
class Evaluator:
    """Stability index source: exact computation or a trained predictor."""

    kind: IndexKind = SIGMA_MIN
    model: Any = None

    def __post_init__(self):
        if self.model is not None and self.model.target_kind != self.kind:
            raise ValueError(
                f"model predicts {self.model.target_kind.name}, evaluator wants {self.kind.name}"
            )

    @property
    def is_exact(self) -> bool:
        return self.model is None

    @property
    def mode(self) -> str:
        return "exact" if self.is_exact else "surrogate"

    @classmethod
    def exact(cls, kind: IndexKind = SIGMA_MIN) -> "Evaluator":
        return cls(kind, None)

    @classmethod
    def surrogate(cls, model) -> "Evaluator":
        return cls(model.target_kind, model)


def evaluate(ev: Evaluator, net, alpha, sol) -> float:
    """Stability index of one converged operating point."""
    if not sol.converged:
        raise PreconditionError("stability index requested at an unconverged solution")
    if ev.is_exact:
        if ev.kind != SIGMA_MIN:
            raise PreconditionError(f"no exact evaluator for index kind {ev.kind.name!r}")
        return sigma_min(jacobian(net, alpha, sol))
    from .surrogate import encode, predict

    return predict(ev.model, encode(net, alpha, sol))


def expected_index(ev: Evaluator, net, alpha, scen, sols) -> float:
    """Probability-weighted index over the scenarios of ``scen``."""
    return float(scen.pi @ scenario_indices(ev, net, alpha, scen, sols))


def scenario_indices(ev: Evaluator, net, alpha, scen, sols) -> np.ndarray:
    if sols is None or len(sols) != len(scen):
        raise DimensionError("one power-flow solution per scenario required")
    if ev.is_exact:
        return np.array([evaluate(ev, net, alpha, s) for s in sols])
    from .surrogate import encode, predict_batch

    for s in sols:
        if not s.converged:
            raise PreconditionError("stability index requested at an unconverged solution")
    return predict_batch(ev.model, np.stack([encode(net, alpha, s) for s in sols]))
