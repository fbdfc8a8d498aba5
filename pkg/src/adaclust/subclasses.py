"""Mapping between parent classes and sub-class pseudo-labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LabelError


@dataclass
class SubClassMap:
    """Partition of each parent class into contiguous pseudo-label ids.

    Parent ``c`` owns the ids ``offsets[c] .. offsets[c] + counts[c] - 1``,
    so ids are always ``0..P-1`` with no gaps.
    """

    counts: np.ndarray
    assignment: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if np.any(self.counts < 1):
            raise LabelError("every parent class needs at least one pseudo-label")
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.n_pseudo):
            raise LabelError("assignment outside pseudo-label range")

    @property
    def n_parents(self) -> int:
        return len(self.counts)

    @property
    def n_pseudo(self) -> int:
        return int(self.counts.sum())

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)

    @property
    def pseudo_to_parent(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_parents), self.counts)

    def members(self, parent: int) -> np.ndarray:
        start = self.offsets[parent]
        return np.arange(start, start + self.counts[parent])

    def to_parent(self, pseudo_labels) -> np.ndarray:
        return self.pseudo_to_parent[np.asarray(pseudo_labels, dtype=np.int64)]

    @classmethod
    def identity(cls, parent_labels, n_classes: int) -> "SubClassMap":
        return cls(np.ones(n_classes, dtype=np.int64), np.asarray(parent_labels, dtype=np.int64))

    @classmethod
    def from_local(cls, parent_labels, local_ids, counts) -> "SubClassMap":
        """Build from per-sample cluster ids that are local to each parent."""
        parent_labels = np.asarray(parent_labels, dtype=np.int64)
        local_ids = np.asarray(local_ids, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if parent_labels.shape != local_ids.shape:
            raise DimensionError("parent labels and local ids differ in length")
        if np.any(local_ids >= counts[parent_labels]) or np.any(local_ids < 0):
            raise LabelError("local cluster id outside its parent's range")
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        return cls(counts, offsets[parent_labels] + local_ids)

    def to_dict(self) -> dict:
        return {"counts": self.counts.tolist(), "pseudo_to_parent": self.pseudo_to_parent.tolist()}
