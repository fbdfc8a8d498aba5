"""Datasets: a synthetic multi-modal generator and a CSV feature loader.

Generated classes consist of one or more Gaussian modes. Every mode is a
tight blob, and the blobs of one class sit far apart, so a multi-mode
class has no single representative point. ``class_spread`` controls how
close different classes sit to each other.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeneratorError, ParameterError, ParseError
from .numeric import Rng

MAX_PLACEMENT_RETRIES = 1000


@dataclass
class Dataset:
    features: np.ndarray
    parent_labels: np.ndarray
    class_names: list
    mode_ids: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.parent_labels = np.asarray(self.parent_labels, dtype=np.int64)
        if self.mode_ids is not None:
            self.mode_ids = np.asarray(self.mode_ids, dtype=np.int64)
            if self.mode_ids.shape != self.parent_labels.shape:
                raise ParameterError("mode_ids must have one entry per sample")
        if self.features.ndim != 2 or len(self.features) != len(self.parent_labels):
            raise ParameterError("features and labels disagree in length")
        if len(self.parent_labels) and (self.parent_labels.min() < 0
                                        or self.parent_labels.max() >= len(self.class_names)):
            raise ParameterError("parent label outside class range")

    def __len__(self):
        return len(self.parent_labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        modes = None if self.mode_ids is None else self.mode_ids[idx]
        return Dataset(self.features[idx], self.parent_labels[idx], list(self.class_names), modes)

    def equals(self, other: "Dataset") -> bool:
        same_modes = (self.mode_ids is None and other.mode_ids is None) or (
            self.mode_ids is not None and other.mode_ids is not None
            and np.array_equal(self.mode_ids, other.mode_ids))
        return (list(self.class_names) == list(other.class_names)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.parent_labels, other.parent_labels)
                and same_modes)


@dataclass
class GeneratorSpec:
    """Recipe for a synthetic dataset.

    ``modes[c]`` is the number of latent modes of class ``c`` and
    ``samples_per_class[c]`` its sample count, split as evenly as possible
    over the modes. ``separation`` is the minimum distance between modes of
    one class and ``class_spread`` the radius on which class centres are
    placed, both in units of ``sigma``. ``share_center_with[c]``, when not
    None, puts class ``c``'s centre on another class's centre, which makes
    the two classes inseparable by any single prototype per class.
    """

    modes: list
    samples_per_class: list
    dim: int = 20
    sigma: float = 1.0
    separation: float = 12.0
    class_spread: float = 6.0
    seed: int = 0
    class_names: list = field(default_factory=list)
    share_center_with: list = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.samples_per_class, int):
            self.samples_per_class = [self.samples_per_class] * len(self.modes)
        self.modes = [int(m) for m in self.modes]
        self.samples_per_class = [int(s) for s in self.samples_per_class]
        if not self.class_names:
            self.class_names = [f"class{c}" for c in range(len(self.modes))]
        self.validate()

    def validate(self):
        if not self.modes:
            raise ParameterError("modes: at least one class required")
        if len(self.samples_per_class) != len(self.modes):
            raise ParameterError("samples_per_class: one entry per class required")
        if len(self.class_names) != len(self.modes):
            raise ParameterError("class_names: one entry per class required")
        if any(m < 1 for m in self.modes):
            raise ParameterError("modes: every class needs >= 1 mode")
        if any(s < m for s, m in zip(self.samples_per_class, self.modes)):
            raise ParameterError("samples_per_class: need at least one sample per mode")
        if self.dim < 1:
            raise ParameterError("dim: must be >= 1")
        if self.sigma < 0:
            raise ParameterError("sigma: must be >= 0")
        if not self.separation > 0:
            raise ParameterError("separation: must be > 0")
        if self.class_spread < 0:
            raise ParameterError("class_spread: must be >= 0")
        if self.share_center_with:
            if len(self.share_center_with) != len(self.modes):
                raise ParameterError("share_center_with: one entry per class required")
            for c, j in enumerate(self.share_center_with):
                if j is not None and not (0 <= j < len(self.modes) and j != c):
                    raise ParameterError(f"share_center_with: invalid class index {j} for class {c}")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown generator field(s): {', '.join(sorted(unknown))}")
        for required in ("modes", "samples_per_class"):
            if required not in d:
                raise ParameterError(f"{required}: missing")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _random_direction(rng: Rng, dim: int) -> np.ndarray:
    while True:
        v = rng.gaussian(dim)
        norm = math.sqrt(float(v @ v))
        if norm > 1e-12:
            return v / norm


def _place_on_sphere(rng: Rng, count: int, dim: int, radius: float, min_dist: float):
    """``count`` points on a sphere, pairwise at least ``min_dist`` apart."""
    for _ in range(MAX_PLACEMENT_RETRIES):
        pts = np.array([radius * _random_direction(rng, dim) for _ in range(count)])
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt(np.sum(diff * diff, axis=-1))
        np.fill_diagonal(d, np.inf)
        if count == 1 or d.min() >= min_dist:
            return pts
    raise GeneratorError(
        f"could not place {count} points {min_dist:g} apart on a radius-{radius:g} sphere "
        f"in {dim} dimensions after {MAX_PLACEMENT_RETRIES} tries")


def mode_centers(spec: GeneratorSpec) -> list[np.ndarray]:
    rng = Rng(spec.seed).fork(0)
    scale = spec.sigma if spec.sigma > 0 else 1.0
    drawn = [spec.class_spread * scale * _random_direction(rng, spec.dim) for _ in spec.modes]
    shared = spec.share_center_with or [None] * len(spec.modes)
    out = []
    for c, m in enumerate(spec.modes):
        centre = drawn[c] if shared[c] is None else drawn[shared[c]]
        if m == 1:
            out.append(centre[None, :])
            continue
        min_dist = spec.separation * scale
        offsets = _place_on_sphere(rng, m, spec.dim, min_dist, min_dist)
        # the class centre is the centroid of its modes
        out.append(centre + offsets - offsets.mean(axis=0))
    return out


def generate(spec: GeneratorSpec) -> Dataset:
    spec.validate()
    centres = mode_centers(spec)
    rng = Rng(spec.seed).fork(1)
    feats, labels, modes = [], [], []
    for c, (m, total) in enumerate(zip(spec.modes, spec.samples_per_class)):
        base, extra = divmod(total, m)
        for j in range(m):
            n = base + (1 if j < extra else 0)
            noise = rng.gaussian(n * spec.dim, 0.0, spec.sigma).reshape(n, spec.dim)
            feats.append(centres[c][j] + noise)
            labels.extend([c] * n)
            modes.extend([j] * n)
    return Dataset(np.vstack(feats), np.array(labels), list(spec.class_names), np.array(modes))


def save_features(dataset: Dataset, path) -> None:
    """Write ``label,f0..f{D-1}[,mode]`` with shortest round-trip floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["label", *(f"f{i}" for i in range(dataset.dim))]
        if dataset.mode_ids is not None:
            header.append("mode")
        w.writerow(header)
        for i in range(len(dataset)):
            row = [dataset.class_names[dataset.parent_labels[i]], *(repr(float(v)) for v in dataset.features[i])]
            if dataset.mode_ids is not None:
                row.append(int(dataset.mode_ids[i]))
            w.writerow(row)


def load_features(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise ParseError("file not found", path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        if not header or header[0] != "label":
            raise ParseError("first header column must be 'label'", path, 1)
        has_mode = header[-1] == "mode"
        feat_cols = header[1:-1] if has_mode else header[1:]
        if not feat_cols:
            raise ParseError("no feature columns", path, 1)
        for i, name in enumerate(feat_cols):
            if name != f"f{i}":
                raise ParseError(f"unknown header column {name!r}, expected 'f{i}'", path, 1)
        width = len(header)
        names, label_ids, rows, modes = [], [], [], []
        index = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} columns, got {len(row)}", path, line_no)
            name = row[0]
            if name not in index:
                index[name] = len(names)
                names.append(name)
            label_ids.append(index[name])
            try:
                rows.append([float(v) for v in row[1:1 + len(feat_cols)]])
                if has_mode:
                    modes.append(int(row[-1]))
            except ValueError as exc:
                raise ParseError(f"non-numeric value ({exc})", path, line_no) from None
            if not all(math.isfinite(v) for v in rows[-1]):
                raise ParseError("non-finite feature value", path, line_no)
    features = np.array(rows, dtype=np.float64).reshape(len(rows), len(feat_cols))
    return Dataset(features, np.array(label_ids, dtype=np.int64), names,
                   np.array(modes, dtype=np.int64) if has_mode else None)
