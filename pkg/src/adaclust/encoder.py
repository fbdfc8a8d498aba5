"""MLP embedding encoder with a classifier head, trained by hand-written backprop.

The network maps D-dim inputs through ReLU hidden layers to a linear
E-dim embedding, then a linear head produces one logit per pseudo-label.
The objective is softmax cross-entropy on the logits plus a margin
triplet loss on the embeddings; parameters are updated with Adam.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, LabelError, ParameterError, TrainingDivergenceError
from .numeric import Rng, pairwise_sq_dists
from .subclasses import SubClassMap

CHECKPOINT_SCHEMA_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int


@dataclass
class LossBreakdown:
    cross_entropy: float
    triplet: float
    total: float
    margin: float

    def to_dict(self) -> dict:
        return {
            "cross_entropy": self.cross_entropy,
            "triplet": self.triplet,
            "total": self.total,
            "margin": self.margin,
        }


class EncoderModel:
    """Weights, biases and Adam state for the encoder and its head.

    ``params`` holds ``W0, b0, ..., W{L}, b{L}`` for the hidden and
    embedding layers (``W`` shaped ``(in, out)``), plus ``head_w`` shaped
    ``(P, E)`` so that each pseudo-label owns one row, and ``head_b``.
    Inputs are standardized with the fixed ``input_shift`` and
    ``input_scale`` vectors (identity until ``fit_input_scaling`` is called).
    """

    def __init__(self, input_dim: int, hidden_dims, embed_dim: int, n_outputs: int,
                 rng: Rng | None = None, normalize: bool = False):
        self.input_dim = int(input_dim)
        self.hidden_dims = tuple(int(h) for h in hidden_dims)
        self.embed_dim = int(embed_dim)
        self.normalize = bool(normalize)
        self.step = 0
        self.input_shift = np.zeros(self.input_dim)
        self.input_scale = np.ones(self.input_dim)
        self.params: dict[str, np.ndarray] = {}
        dims = (self.input_dim, *self.hidden_dims, self.embed_dim)
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.gaussian(fan_in * fan_out, 0.0, np.sqrt(2.0 / fan_in)).reshape(fan_in, fan_out)
            self.params[f"W{i}"] = w
            self.params[f"b{i}"] = np.zeros(fan_out)
        self.params["head_w"] = self._init_head_rows(int(n_outputs), rng)
        self.params["head_b"] = np.zeros(int(n_outputs))
        self.m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.params.items()}

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims) + 1

    @property
    def n_outputs(self) -> int:
        return self.params["head_w"].shape[0]

    def _init_head_rows(self, n: int, rng: Rng | None) -> np.ndarray:
        if rng is None:
            return np.zeros((n, self.embed_dim))
        bound = 1.0 / np.sqrt(self.embed_dim)
        u = rng.uniform(n * self.embed_dim) if n else np.zeros(0)
        return (bound * (2.0 * u - 1.0)).reshape(n, self.embed_dim)

    def fit_input_scaling(self, features) -> None:
        """Per-feature mean and standard deviation of ``features``; constant
        columns keep scale 1."""
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim or len(x) == 0:
            raise DimensionError(f"need a non-empty (n, {self.input_dim}) matrix, got {x.shape}")
        std = x.std(axis=0)
        self.input_shift = x.mean(axis=0)
        self.input_scale = np.where(std > 1e-12, std, 1.0)

    def copy(self) -> "EncoderModel":
        other = object.__new__(EncoderModel)
        other.__dict__.update(self.__dict__)
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.m = {k: v.copy() for k, v in self.m.items()}
        other.v = {k: v.copy() for k, v in self.v.items()}
        return other

    def _forward_cache(self, batch: np.ndarray):
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionError(f"batch must have {self.input_dim} columns, got shape {x.shape}")
        x = (x - self.input_shift) / self.input_scale
        acts = [x]
        pre = []
        h = x
        last = self.n_layers - 1
        for i in range(self.n_layers):
            z = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        raw = h
        norms = None
        if self.normalize:
            norms = np.sqrt(np.sum(raw * raw, axis=1, keepdims=True))
            emb = raw / np.maximum(norms, 1e-12)
        else:
            emb = raw
        logits = emb @ self.params["head_w"].T + self.params["head_b"]
        return emb, logits, (acts, pre, norms)

    def forward(self, batch) -> tuple[np.ndarray, np.ndarray]:
        emb, logits, _ = self._forward_cache(batch)
        return emb, logits

    def embed(self, batch) -> np.ndarray:
        return self._forward_cache(batch)[0]

    def _backward(self, d_emb: np.ndarray, d_logits: np.ndarray, emb: np.ndarray, cache) -> dict:
        acts, pre, norms = cache
        grads = {
            "head_w": d_logits.T @ emb,
            "head_b": d_logits.sum(axis=0),
        }
        d = d_emb + d_logits @ self.params["head_w"]
        if self.normalize:
            d = (d - emb * np.sum(emb * d, axis=1, keepdims=True)) / np.maximum(norms, 1e-12)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                d = d * (pre[i] > 0)
            grads[f"W{i}"] = acts[i].T @ d
            grads[f"b{i}"] = d.sum(axis=0)
            if i > 0:
                d = d @ self.params[f"W{i}"].T
        return grads


def forward(model: EncoderModel, batch) -> tuple[np.ndarray, np.ndarray]:
    return model.forward(batch)


def cross_entropy_loss(logits, pseudo_labels) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(pseudo_labels, dtype=np.int64)
    n, p = logits.shape
    if labels.shape != (n,):
        raise DimensionError("one label per logit row required")
    if n and (labels.min() < 0 or labels.max() >= p):
        raise LabelError(f"labels must lie in [0, {p})")
    if n == 0:
        return 0.0, np.zeros_like(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(lse - shifted[rows, labels]))
    grad = np.exp(shifted - lse[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n


def triplet_loss(embeddings, triplets, alpha: float) -> tuple[float, np.ndarray]:
    """Mean hinge ``max(|a-p| - |a-n| + alpha, 0)`` over triplets, with gradient.

    Triplets exactly at the hinge, and zero-length differences, contribute
    zero gradient.
    """
    if alpha < 0:
        raise ParameterError("margin must be >= 0")
    emb = np.asarray(embeddings, dtype=np.float64)
    grad = np.zeros_like(emb)
    if len(triplets) == 0:
        return 0.0, grad
    t = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if t.min() < 0 or t.max() >= emb.shape[0]:
        raise IndexError("triplet index out of range")
    a, p, n = emb[t[:, 0]], emb[t[:, 1]], emb[t[:, 2]]
    dap_vec = a - p
    dan_vec = a - n
    dap = np.sqrt(np.sum(dap_vec * dap_vec, axis=1))
    dan = np.sqrt(np.sum(dan_vec * dan_vec, axis=1))
    hinge = dap - dan + alpha
    losses = np.maximum(hinge, 0.0)
    count = len(t)
    active = hinge > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        u_ap = np.where(dap[:, None] > 0, dap_vec / dap[:, None], 0.0)
        u_an = np.where(dan[:, None] > 0, dan_vec / dan[:, None], 0.0)
    w = active[:, None] / count
    # accumulate in triplet order so the reduction is fixed
    np.add.at(grad, t[:, 0], w * (u_ap - u_an))
    np.add.at(grad, t[:, 1], -w * u_ap)
    np.add.at(grad, t[:, 2], w * u_an)
    return float(losses.mean()), grad


def mine_triplets(embeddings, pseudo_labels, parent_labels, rng: Rng | None = None,
                  negatives: str = "parent", strategy: str = "batch_hard") -> list[Triplet]:
    """One triplet per eligible anchor.

    Positives share the anchor's pseudo-label. Negatives come from a
    different parent class (``negatives="parent"``) or from any different
    pseudo-label (``negatives="pseudo"``). ``batch_hard`` picks the farthest
    positive and nearest negative, ties to the lowest index; ``random``
    draws both uniformly from ``rng``.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    pseudo = np.asarray(pseudo_labels)
    parent = np.asarray(parent_labels)
    n = emb.shape[0]
    if pseudo.shape != (n,) or parent.shape != (n,):
        raise DimensionError("label vectors must match batch size")
    if negatives not in ("parent", "pseudo"):
        raise ParameterError(f"unknown negatives source {negatives!r}")
    if strategy == "random" and rng is None:
        raise ParameterError("random mining needs an rng")
    d = pairwise_sq_dists(emb, emb)
    pos_mask = pseudo[:, None] == pseudo[None, :]
    np.fill_diagonal(pos_mask, False)
    neg_key = parent if negatives == "parent" else pseudo
    neg_mask = neg_key[:, None] != neg_key[None, :]
    out = []
    for i in range(n):
        pos = np.flatnonzero(pos_mask[i])
        neg = np.flatnonzero(neg_mask[i])
        if pos.size == 0 or neg.size == 0:
            continue
        if strategy == "batch_hard":
            j = pos[np.argmax(d[i, pos])]
            k = neg[np.argmin(d[i, neg])]
        elif strategy == "random":
            j = pos[rng.integers(pos.size)]
            k = neg[rng.integers(neg.size)]
        else:
            raise ParameterError(f"unknown mining strategy {strategy!r}")
        out.append(Triplet(i, int(j), int(k)))
    return out


def loss_and_grads(model: EncoderModel, batch, pseudo_labels, parent_labels, alpha: float,
                   use_triplet: bool, triplets=None, negatives: str = "parent"):
    """Total loss, its breakdown and per-parameter gradients.

    When ``triplets`` is None and the triplet term is on, triplets are
    mined batch-hard from the current embeddings.
    """
    emb, logits, cache = model._forward_cache(batch)
    ce, d_logits = cross_entropy_loss(logits, pseudo_labels)
    if use_triplet:
        if triplets is None:
            triplets = mine_triplets(emb, pseudo_labels, parent_labels, negatives=negatives)
        tl, d_emb = triplet_loss(emb, triplets, alpha)
    else:
        triplets = []
        tl, d_emb = 0.0, np.zeros_like(emb)
    grads = model._backward(d_emb, d_logits, emb, cache)
    return LossBreakdown(ce, tl, ce + tl, float(alpha)), grads, triplets


def adam_update(model: EncoderModel, grads: dict, lr: float) -> None:
    model.step += 1
    t = model.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name, g in grads.items():
        m = model.m[name]
        v = model.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        model.params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def backward_and_step(model: EncoderModel, batch, pseudo_labels, parent_labels, alpha: float,
                      lr: float, use_triplet: bool, batch_index: int = 0,
                      negatives: str = "parent") -> LossBreakdown:
    # non-finite values are reported below as a divergence error
    with np.errstate(invalid="ignore", over="ignore"):
        breakdown, grads, _ = loss_and_grads(model, batch, pseudo_labels, parent_labels, alpha,
                                             use_triplet, negatives=negatives)
    if not np.isfinite(breakdown.total):
        raise TrainingDivergenceError(batch_index, f"loss={breakdown.total}")
    adam_update(model, grads, lr)
    for name, p in model.params.items():
        if not np.all(np.isfinite(p)):
            raise TrainingDivergenceError(batch_index, f"parameter {name} became non-finite")
    return breakdown


def resize_head(model: EncoderModel, old_map: SubClassMap, new_map: SubClassMap,
                rng: Rng) -> EncoderModel:
    """Return a copy whose head matches ``new_map``.

    Parents whose cluster count is unchanged keep their head rows and Adam
    moments; every other parent gets fresh rows with zeroed moments.
    """
    if old_map.n_parents != new_map.n_parents:
        raise DimensionError("maps cover different parent classes")
    if model.n_outputs != old_map.n_pseudo:
        raise DimensionError("model head does not match the old map")
    out = model.copy()
    p_new = new_map.n_pseudo
    fresh = {
        "head_w": out._init_head_rows(p_new, rng),
        "head_b": np.zeros(p_new),
    }
    new_state = {
        name: (fresh[name], np.zeros_like(fresh[name]), np.zeros_like(fresh[name]))
        for name in fresh
    }
    for c in range(new_map.n_parents):
        if old_map.counts[c] != new_map.counts[c]:
            continue
        src = old_map.members(c)
        dst = new_map.members(c)
        for name in fresh:
            value, m, v = new_state[name]
            value[dst] = model.params[name][src]
            m[dst] = model.m[name][src]
            v[dst] = model.v[name][src]
    for name, (value, m, v) in new_state.items():
        out.params[name] = value
        out.m[name] = m
        out.v[name] = v
    return out


def save_checkpoint(path, model: EncoderModel, meta: dict | None = None) -> None:
    header = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "input_dim": model.input_dim,
        "hidden_dims": list(model.hidden_dims),
        "embed_dim": model.embed_dim,
        "n_outputs": model.n_outputs,
        "normalize": model.normalize,
        "step": model.step,
        "meta": meta or {},
    }
    arrays = {"header": np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
              "input/shift": model.input_shift, "input/scale": model.input_scale}
    for name in model.params:
        arrays[f"param/{name}"] = model.params[name]
        arrays[f"adam_m/{name}"] = model.m[name]
        arrays[f"adam_v/{name}"] = model.v[name]
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[EncoderModel, dict]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(data["header"].tobytes().decode())
        if header.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
            raise ValueError(f"unsupported checkpoint schema {header.get('schema_version')}")
        model = EncoderModel(header["input_dim"], header["hidden_dims"], header["embed_dim"],
                             header["n_outputs"], rng=None, normalize=header["normalize"])
        model.step = int(header["step"])
        model.input_shift = data["input/shift"].copy()
        model.input_scale = data["input/scale"].copy()
        for name in list(model.params):
            model.params[name] = data[f"param/{name}"].copy()
            model.m[name] = data[f"adam_m/{name}"].copy()
            model.v[name] = data[f"adam_v/{name}"].copy()
    return model, header["meta"]
