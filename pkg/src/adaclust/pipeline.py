"""Training loop with adaptive sub-class pseudo-labels.

One fold runs: train an epoch on pseudo-labels, validate at parent level,
let the controller adjust every class's cluster budget from its false
negatives, then re-cluster each class's current embeddings with capped
X-Means and resize the classifier head to the new pseudo-label count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import kmeans, xmeans_capped
from .controller import ClusterBudget, ControllerConfig, budget_trace, update_budgets
from .data import Dataset
from .encoder import EncoderModel, LossBreakdown, backward_and_step, resize_head
from .errors import AdaclustError, EmptyInputError, ParameterError
from .metrics import EvalReport, confusion, kfold_split, report
from .numeric import Rng
from .subclasses import SubClassMap

REPORT_SCHEMA_VERSION = 1

MODES = ("standard", "triplet", "clustering", "clustering_triplet", "fixed_k")
TRIPLET_MODES = ("triplet", "clustering_triplet", "fixed_k")
CONTROLLER_MODES = ("clustering", "clustering_triplet")


@dataclass
class RunConfig:
    mode: str = "clustering_triplet"
    fixed_k: int = 5
    lr: float = 2e-4
    batch_size: int = 128
    margin: float = 0.2
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    hidden_dims: tuple = (64, 64)
    embed_dim: int = 16
    epochs: int = 100
    patience: int = 10
    folds: int = 5
    seed: int = 0
    normalize_embeddings: bool = False
    negatives: str = "parent"
    frozen_features: bool = False
    xmeans_restarts: int = 1
    standardize: bool = True

    def __post_init__(self):
        if isinstance(self.controller, dict):
            self.controller = ControllerConfig(**self.controller)
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode: unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.mode == "fixed_k" and self.fixed_k < 1:
            raise ParameterError("fixed_k: must be >= 1")
        if self.lr < 0:
            raise ParameterError("lr: must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size: must be >= 1")
        if self.margin < 0:
            raise ParameterError("margin: must be >= 0")
        if self.epochs < 1 or self.patience < 1:
            raise ParameterError("epochs and patience must be >= 1")
        if self.folds < 2:
            raise ParameterError("folds: must be >= 2")
        if self.negatives not in ("parent", "pseudo"):
            raise ParameterError("negatives: must be 'parent' or 'pseudo'")

    @property
    def use_triplet(self) -> bool:
        return self.mode in TRIPLET_MODES

    @property
    def uses_controller(self) -> bool:
        return self.mode in CONTROLLER_MODES

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown run config field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    budgets: ClusterBudget
    cluster_counts: list
    losses: LossBreakdown
    validation: EvalReport

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "budgets": self.budgets.to_dict(),
            "cluster_counts": list(self.cluster_counts),
            "losses": self.losses.to_dict(),
            "validation": self.validation.to_dict(),
        }


@dataclass
class FoldResult:
    fold: int
    records: list
    budget_history: list
    best_epoch: int
    best_report: EvalReport
    best_model: EncoderModel
    best_map: SubClassMap
    final_map: SubClassMap

    @property
    def final_budgets(self) -> ClusterBudget:
        return self.budget_history[-1]

    def to_dict(self) -> dict:
        trace = budget_trace(self.budget_history)
        return {
            "fold": self.fold,
            "best_epoch": self.best_epoch,
            "best": self.best_report.to_dict(),
            "final_budgets": self.final_budgets.to_dict(),
            "final_cluster_counts": self.final_map.counts.tolist(),
            "controller_trace": [
                {"sequence": t.sequence, "reversals": t.reversals, "final": t.final} for t in trace
            ],
            "epochs": [r.to_dict() for r in self.records],
        }


METRIC_KEYS = ("accuracy", "recall", "precision", "f_score", "var_fn", "var_fp")


def aggregate(reports) -> dict:
    reports = list(reports)
    return {k: float(np.mean([getattr(r, k) for r in reports])) for k in METRIC_KEYS}


@dataclass
class RunResult:
    config: RunConfig
    folds: list

    def aggregate(self) -> dict:
        return aggregate(f.best_report for f in self.folds)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "aggregate": self.aggregate(),
            "folds": [f.to_dict() for f in self.folds],
        }


def _align_to_previous(local: np.ndarray, k: int, previous: np.ndarray) -> np.ndarray:
    """Renumber cluster ids to maximise overlap with the previous epoch's ids."""
    overlap = np.zeros((k, k), dtype=np.int64)
    np.add.at(overlap, (local, previous), 1)
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(k, dtype=np.int64)
    perm[rows] = cols
    return perm[local]


def recluster(train: Dataset, model: EncoderModel, budgets: ClusterBudget, rng: Rng,
              previous: SubClassMap | None = None, frozen_features: bool = False,
              restarts: int = 1) -> SubClassMap:
    """Cluster each class's embeddings under its budget and relabel.

    Classes with budget 1 or fewer than two samples keep a single
    pseudo-label. When a class ends up with the same number of clusters as
    in ``previous``, its cluster ids are matched to the old ones so the
    preserved head rows keep meaning the same sub-class.
    """
    if len(budgets) != train.n_classes:
        raise ParameterError("one budget per class required")
    emb = train.features if frozen_features else model.embed(train.features)
    local = np.zeros(len(train), dtype=np.int64)
    counts = []
    for c in range(train.n_classes):
        idx = np.flatnonzero(train.parent_labels == c)
        cap = budgets.num_allowed[c]
        if cap <= 1 or len(idx) < 2:
            counts.append(1)
            continue
        res = xmeans_capped(emb[idx], cap, rng.fork(c), restarts=restarts)
        used, ids = np.unique(res.assignment, return_inverse=True)
        k = len(used)
        if previous is not None and previous.counts[c] == k and k > 1:
            prev_local = previous.assignment[idx] - previous.offsets[c]
            ids = _align_to_previous(ids, k, prev_local)
        local[idx] = ids
        counts.append(k)
    return SubClassMap.from_local(train.parent_labels, local, counts)


def fixed_partition(train: Dataset, k: int, rng: Rng) -> SubClassMap:
    """Split every class into ``min(k, n_c)`` clusters with plain K-Means."""
    local = np.zeros(len(train), dtype=np.int64)
    counts = []
    for c in range(train.n_classes):
        idx = np.flatnonzero(train.parent_labels == c)
        kc = max(1, min(k, len(idx)))
        if kc == 1:
            counts.append(1)
            continue
        res = kmeans(train.features[idx], kc, rng.fork(c))
        used, ids = np.unique(res.assignment, return_inverse=True)
        local[idx] = ids
        counts.append(len(used))
    return SubClassMap.from_local(train.parent_labels, local, counts)


def train_epoch(model: EncoderModel, train: Dataset, submap: SubClassMap, cfg: RunConfig,
                rng: Rng) -> LossBreakdown:
    """One shuffled pass of mini-batch Adam; returns batch-mean losses."""
    if model.n_outputs != submap.n_pseudo:
        raise ParameterError("head size does not match the pseudo-label count")
    order = rng.permutation(len(train))
    totals = np.zeros(3)
    n_batches = 0
    for b, start in enumerate(range(0, len(order), cfg.batch_size)):
        idx = order[start:start + cfg.batch_size]
        br = backward_and_step(model, train.features[idx], submap.assignment[idx],
                               train.parent_labels[idx], cfg.margin, cfg.lr,
                               cfg.use_triplet, batch_index=b, negatives=cfg.negatives)
        totals += (br.cross_entropy, br.triplet, br.total)
        n_batches += 1
    ce, tl, tot = totals / max(n_batches, 1)
    return LossBreakdown(float(ce), float(tl), float(tot), float(cfg.margin))


def predict_parents(model: EncoderModel, features, submap: SubClassMap) -> np.ndarray:
    _, logits = model.forward(features)
    return submap.to_parent(np.argmax(logits, axis=1))


def validate(model: EncoderModel, val: Dataset, submap: SubClassMap) -> EvalReport:
    if len(val) == 0:
        raise EmptyInputError("validation set is empty")
    pred = predict_parents(model, val.features, submap)
    return report(confusion(val.parent_labels, pred, val.n_classes, val.class_names))


class FoldError(AdaclustError):
    def __init__(self, fold, cause):
        self.fold = fold
        super().__init__(f"fold {fold} failed: {cause}")


def run_fold(cfg: RunConfig, train: Dataset, val: Dataset, rng: Rng, fold: int = 0) -> FoldResult:
    budgets = ClusterBudget.initial(train.n_classes)
    if cfg.mode == "fixed_k":
        submap = fixed_partition(train, cfg.fixed_k, rng.fork(4))
    else:
        submap = SubClassMap.identity(train.parent_labels, train.n_classes)
    model = EncoderModel(train.dim, cfg.hidden_dims, cfg.embed_dim, submap.n_pseudo,
                         rng=rng.fork(0), normalize=cfg.normalize_embeddings)
    if cfg.standardize:
        model.fit_input_scaling(train.features)
    records, history = [], [budgets]
    best = (-1.0, -1, None, None, None)
    stale = 0
    for epoch in range(cfg.epochs):
        losses = train_epoch(model, train, submap, cfg, rng.fork(1, epoch))
        rep = validate(model, val, submap)
        records.append(EpochRecord(epoch, budgets, submap.counts.tolist(), losses, rep))
        if rep.f_score > best[0]:
            best = (rep.f_score, epoch, rep, model.copy(), submap)
            stale = 0
        else:
            stale += 1
        if cfg.uses_controller:
            budgets = update_budgets(budgets, rep.controller_fn(), cfg.controller)
            history.append(budgets)
            new_map = recluster(train, model, budgets, rng.fork(2, epoch), previous=submap,
                                frozen_features=cfg.frozen_features, restarts=cfg.xmeans_restarts)
            if not np.array_equal(new_map.counts, submap.counts):
                model = resize_head(model, submap, new_map, rng.fork(3, epoch))
            submap = new_map
        if stale >= cfg.patience:
            break
    _, best_epoch, best_rep, best_model, best_map = best
    return FoldResult(fold, records, history, best_epoch, best_rep, best_model, best_map, submap)


def fold_indices(cfg: RunConfig, data: Dataset) -> list[np.ndarray]:
    return kfold_split(len(data), cfg.folds, Rng(cfg.seed).fork(1), data.parent_labels)


def _run_one(args):
    cfg, data, folds, f = args
    val_idx = folds[f]
    train_idx = np.sort(np.concatenate([folds[j] for j in range(len(folds)) if j != f]))
    try:
        return run_fold(cfg, data.subset(train_idx), data.subset(val_idx),
                        Rng(cfg.seed).fork(2, f), fold=f)
    except AdaclustError as exc:
        raise FoldError(f, exc) from exc


def run(cfg: RunConfig, data: Dataset, n_jobs: int = 1) -> RunResult:
    """All K folds of one mode. Folds are independent, so ``n_jobs > 1``
    runs them in worker processes with identical results."""
    folds = fold_indices(cfg, data)
    jobs = [(cfg, data, folds, f) for f in range(cfg.folds)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return RunResult(cfg, results)
