"""Per-class cluster budget driven by validation false negatives.

Each class carries ``num_allowed`` (the cap handed to X-Means) and a
direction flag. While a class stays confused, its budget climbs to
``max_clusters``, then the flag flips and it descends back to 1, and so on.
A class at or below the threshold keeps its state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError


@dataclass(frozen=True)
class ControllerConfig:
    confusion_threshold: float = 0.3
    max_clusters: int = 5

    def __post_init__(self):
        if not 0.0 < self.confusion_threshold < 1.0:
            raise ParameterError("confusion_threshold must lie in (0, 1)")
        if self.max_clusters < 1:
            raise ParameterError("max_clusters must be >= 1")


@dataclass(frozen=True)
class ClusterBudget:
    num_allowed: tuple
    flag: tuple

    @classmethod
    def initial(cls, n_classes: int) -> "ClusterBudget":
        return cls((1,) * n_classes, (0,) * n_classes)

    def __len__(self):
        return len(self.num_allowed)

    def to_dict(self) -> dict:
        return {"num_allowed": list(self.num_allowed), "flag": list(self.flag)}


def update_budgets(budgets: ClusterBudget, per_class_fn, cfg: ControllerConfig) -> ClusterBudget:
    fn = np.asarray(per_class_fn, dtype=np.float64)
    if fn.shape != (len(budgets),):
        raise DimensionError(f"expected {len(budgets)} false-negative rates, got {fn.shape}")
    num, flags = [], []
    for n, f, rate in zip(budgets.num_allowed, budgets.flag, fn):
        if rate > cfg.confusion_threshold:
            if f == 0:
                n = min(n + 1, cfg.max_clusters)
                if n == cfg.max_clusters:
                    f = 1
            else:
                n = max(n - 1, 1)
                if n == 1:
                    f = 0
        num.append(int(n))
        flags.append(int(f))
    return ClusterBudget(tuple(num), tuple(flags))


@dataclass
class ClassTrace:
    sequence: list
    reversals: int
    final: int


def budget_trace(history) -> list[ClassTrace]:
    """Per-class budget sequence, number of direction reversals, final value."""
    if not history:
        raise ParameterError("history must be non-empty")
    out = []
    for c in range(len(history[0])):
        seq = [int(b.num_allowed[c]) for b in history]
        steps = [np.sign(b - a) for a, b in zip(seq[:-1], seq[1:]) if b != a]
        reversals = sum(1 for a, b in zip(steps[:-1], steps[1:]) if a != b)
        out.append(ClassTrace(seq, reversals, seq[-1]))
    return out
