"""Trainable candidate scorer: hashed text features and a weighted margin ranking loss.

The scorer is linear over hashed character/word n-grams of the candidate,
LF-token-by-candidate-token interactions, and a few dedicated length slots.
Training minimizes, per candidate set, the mean over ordered pairs (i, j) of

    max(0, -(Q_i - Q_j) * ((R_i - R_j) + gamma))

so a pair costs nothing when the predicted gap agrees with the gold gap by at
least the margin, and mis-ordered pairs are penalized in proportion to the
gold quality difference.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from genrerank.core import CandidateSet, lf_tokens

# Slots [0, NUM_RESERVED) hold the dedicated length/ratio features; hashed
# features occupy [NUM_RESERVED, hash_dim).
NUM_RESERVED = 8


@dataclass(frozen=True)
class FeatureConfig:
    char_ngram_orders: tuple[int, ...] = (2, 3, 4)
    word_ngram_orders: tuple[int, ...] = (1, 2)
    hash_dim: int = 2 ** 18
    include_length_feats: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "char_ngram_orders", tuple(sorted(self.char_ngram_orders)))
        object.__setattr__(self, "word_ngram_orders", tuple(sorted(self.word_ngram_orders)))
        if self.hash_dim < 2 or self.hash_dim & (self.hash_dim - 1):
            raise ValueError(f"hash_dim must be a power of two >= 2, got {self.hash_dim}")
        if any(o < 1 for o in self.char_ngram_orders + self.word_ngram_orders):
            raise ValueError("n-gram orders must be >= 1")

    def to_dict(self) -> dict:
        return {
            "char_ngram_orders": list(self.char_ngram_orders),
            "word_ngram_orders": list(self.word_ngram_orders),
            "hash_dim": self.hash_dim,
            "include_length_feats": self.include_length_feats,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureConfig":
        return cls(
            char_ngram_orders=tuple(data["char_ngram_orders"]),
            word_ngram_orders=tuple(data["word_ngram_orders"]),
            hash_dim=int(data["hash_dim"]),
            include_length_feats=bool(data["include_length_feats"]),
        )


def feature_strings(lf: str, candidate: str, cfg: FeatureConfig) -> dict[str, float]:
    """Raw feature-name -> value map, before hashing.

    Exposed so collision measurement can compare against an exact dictionary.
    """
    if not candidate.split():
        raise ValueError("candidate is empty")
    if not lf.split():
        raise ValueError("lf is empty")
    feats: dict[str, float] = {}

    def bump(key: str, value: float = 1.0) -> None:
        feats[key] = feats.get(key, 0.0) + value

    cand_tokens = candidate.split()
    for order in cfg.word_ngram_orders:
        for i in range(len(cand_tokens) - order + 1):
            bump(f"w{order}:" + " ".join(cand_tokens[i:i + order]))
    for order in cfg.char_ngram_orders:
        for i in range(len(candidate) - order + 1):
            bump(f"c{order}:" + candidate[i:i + order])

    keywords = [t for t in lf_tokens(lf) if any(ch.isalnum() for ch in t)]
    for kw in keywords:
        bump(f"lf:{kw}")
        for tok in cand_tokens:
            bump(f"x:{kw}|{tok}")
    return feats


def hash_feature(name: str, cfg: FeatureConfig) -> int:
    """Stable bucket for a feature name, in [NUM_RESERVED, hash_dim)."""
    span = cfg.hash_dim - NUM_RESERVED
    return NUM_RESERVED + zlib.crc32(name.encode("utf-8")) % span


def featurize(lf: str, candidate: str, cfg: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sparse feature vector for one (LF, candidate) pair.

    Returns (indices, values) with unique, sorted indices. Pure and
    deterministic: hashing is seed-independent and platform-stable.
    """
    raw = feature_strings(lf, candidate, cfg)
    acc: dict[int, float] = {}
    for name, value in raw.items():
        idx = hash_feature(name, cfg)
        acc[idx] = acc.get(idx, 0.0) + value
    if cfg.include_length_feats:
        cand_tokens = candidate.split()
        n_cand = len(cand_tokens)
        n_lf = len(lf.split())
        acc[0] = n_cand / 8.0
        acc[1] = n_lf / 8.0
        acc[2] = n_cand / n_lf
        acc[3] = abs(n_cand - n_lf) / 8.0
        acc[4] = float(np.log1p(n_cand))
        acc[5] = len(candidate) / 40.0
    indices = np.array(sorted(acc), dtype=np.int64)
    values = np.array([acc[i] for i in sorted(acc)], dtype=np.float64)
    return indices, values


def measure_collision_rate(pairs: Iterable[tuple[str, str]], cfg: FeatureConfig) -> float:
    """Fraction of distinct feature strings whose hash bucket was already
    claimed by a different string, measured against an exact dictionary."""
    owner: dict[int, str] = {}
    distinct = 0
    collisions = 0
    seen: set[str] = set()
    for lf, candidate in pairs:
        for name in feature_strings(lf, candidate, cfg):
            if name in seen:
                continue
            seen.add(name)
            distinct += 1
            bucket = hash_feature(name, cfg)
            if bucket in owner:
                collisions += 1
            else:
                owner[bucket] = name
    if distinct == 0:
        raise ValueError("no features observed")
    return collisions / distinct


# ---------------------------------------------------------------------------
# Model


@dataclass
class RerankerModel:
    """Linear scorer: weights over the hashed feature space plus a bias.

    gamma is the training margin; it travels with the model so a reload
    reproduces the training objective.
    """

    weights: np.ndarray
    bias: float
    feature_config: FeatureConfig
    gamma: float = 0.1
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.feature_config.hash_dim,):
            raise ValueError(
                f"weight vector has shape {self.weights.shape}, "
                f"feature config expects ({self.feature_config.hash_dim},)")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    @classmethod
    def zeros(cls, feature_config: FeatureConfig, gamma: float = 0.1) -> "RerankerModel":
        return cls(weights=np.zeros(feature_config.hash_dim), bias=0.0,
                   feature_config=feature_config, gamma=gamma)


def score(model: RerankerModel, lf: str, candidate: str) -> float:
    """R(candidate | lf): dot product of the model weights with the pair's features."""
    indices, values = featurize(lf, candidate, model.feature_config)
    return float(model.weights[indices] @ values + model.bias)


def score_set(model: RerankerModel, cs: CandidateSet) -> np.ndarray:
    lf = cs.require_lf()
    return np.array([score(model, lf, c.text) for c in cs.candidates])


MODEL_FORMAT_VERSION = 1


def save_model(model: RerankerModel, path: str) -> None:
    nz = np.flatnonzero(model.weights)
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_config": model.feature_config.to_dict(),
        "gamma": model.gamma,
        "bias": model.bias,
        "dim": int(model.weights.shape[0]),
        "weights": {"indices": nz.tolist(), "values": model.weights[nz].tolist()},
        "train_meta": model.train_meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path: str) -> RerankerModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format {payload.get('format_version')!r}")
    cfg = FeatureConfig.from_dict(payload["feature_config"])
    weights = np.zeros(int(payload["dim"]))
    sparse = payload["weights"]
    weights[np.asarray(sparse["indices"], dtype=np.int64)] = np.asarray(sparse["values"])
    return RerankerModel(weights=weights, bias=float(payload["bias"]), feature_config=cfg,
                         gamma=float(payload["gamma"]), train_meta=dict(payload.get("train_meta", {})))


# ---------------------------------------------------------------------------
# Loss and subgradient


def _check_pair_args(gold: np.ndarray, pred: np.ndarray) -> int:
    if gold.ndim != 1 or pred.ndim != 1 or gold.shape != pred.shape:
        raise ValueError(f"gold and pred must be equal-length vectors, got {gold.shape} vs {pred.shape}")
    n = gold.shape[0]
    if n < 2:
        raise ValueError("a candidate set needs at least 2 candidates")
    return n


def set_loss(gold: Sequence[float], pred: Sequence[float], gamma: float) -> float:
    """Weighted margin ranking loss over all ordered candidate pairs of one set."""
    q = np.asarray(gold, dtype=np.float64)
    r = np.asarray(pred, dtype=np.float64)
    n = _check_pair_args(q, r)
    z = q[:, None] - q[None, :]
    zhat = r[:, None] - r[None, :]
    terms = np.maximum(0.0, -z * (zhat + gamma))
    return float(terms.sum() / (n * (n - 1)))


def _pair_coefficients(q: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    """d loss / d pred: per-candidate coefficients of the active hinge terms.

    At a hinge kink (argument exactly zero) the zero-side subgradient is
    taken, so the pair contributes nothing.
    """
    n = q.shape[0]
    z = q[:, None] - q[None, :]
    zhat = r[:, None] - r[None, :]
    active = (-z * (zhat + gamma)) > 0.0
    slopes = np.where(active, -z, 0.0)
    return (slopes.sum(axis=1) - slopes.sum(axis=0)) / (n * (n - 1))


def set_loss_gradient(
    gold: Sequence[float],
    pred: Sequence[float],
    gamma: float,
    features: np.ndarray | Sequence[tuple[np.ndarray, np.ndarray]],
    dim: int | None = None,
) -> np.ndarray:
    """Exact subgradient of set_loss composed with the linear scorer.

    ``features`` is either a dense (n, dim) matrix or one (indices, values)
    sparse pair per candidate (then ``dim`` sets the output length); the
    result is a dense gradient over weights. The bias subgradient is
    identically zero because only score differences enter the loss.
    """
    q = np.asarray(gold, dtype=np.float64)
    r = np.asarray(pred, dtype=np.float64)
    n = _check_pair_args(q, r)
    coef = _pair_coefficients(q, r, gamma)
    if isinstance(features, np.ndarray):
        if features.shape[0] != n:
            raise ValueError("features row count must match the candidate count")
        return features.T @ coef
    if len(features) != n:
        raise ValueError("features must have one (indices, values) pair per candidate")
    if dim is None:
        dim = 1 + max((int(ix.max()) for ix, _ in features if ix.size), default=-1)
    grad = np.zeros(dim)
    for c_k, (indices, values) in zip(coef, features):
        np.add.at(grad, indices, c_k * values)
    return grad


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    learning_rate: float = 1e-4
    optimizer: str = "adaptive-moment"
    seed: int = 0
    two_phase: bool = True
    unfreeze_epoch: int = 10
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("sgd", "adaptive-moment"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.two_phase and self.unfreeze_epoch < 1:
            raise ValueError("unfreeze_epoch must be >= 1")


class _FeaturizedSet:
    """Per-set feature cache laid out for fast batched scoring and updates."""

    __slots__ = ("gold", "weight", "uix", "inv", "values", "starts", "n", "rows")

    def __init__(self, cs: CandidateSet, gold: Sequence[float], cfg: FeatureConfig):
        lf = cs.require_lf()
        self.gold = np.asarray(gold, dtype=np.float64)
        if len(self.gold) != len(cs):
            raise ValueError(f"set {cs.lf_id!r}: quality vector length {len(self.gold)} "
                             f"!= candidate count {len(cs)}")
        if len(cs) < 2:
            raise ValueError(f"set {cs.lf_id!r}: training needs >= 2 candidates")
        self.n = len(cs)
        self.weight = 1.0
        per_cand = [featurize(lf, c.text, cfg) for c in cs.candidates]
        idx_concat = np.concatenate([ix for ix, _ in per_cand])
        self.values = np.concatenate([vals for _, vals in per_cand])
        nnz = np.array([ix.size for ix, _ in per_cand])
        self.starts = np.zeros(self.n, dtype=np.int64)
        np.cumsum(nnz[:-1], out=self.starts[1:])
        self.uix, self.inv = np.unique(idx_concat, return_inverse=True)
        # Row id of each nonzero, for spreading per-candidate coefficients.
        self.rows = np.repeat(np.arange(self.n), nnz)

    def scores(self, weights: np.ndarray, bias: float) -> np.ndarray:
        prod = weights[self.uix][self.inv] * self.values
        return np.add.reduceat(prod, self.starts) + bias

    def grad_unique(self, coef: np.ndarray) -> np.ndarray:
        contrib = coef[self.rows] * self.values
        return np.bincount(self.inv, weights=contrib, minlength=self.uix.size)


class _Adam:
    """Sparse adaptive-moment updates with catch-up decay for untouched steps."""

    def __init__(self, dim: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.last = np.zeros(dim, dtype=np.int64)
        self.t = 0

    def update(self, weights: np.ndarray, ix: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        dt = self.t - self.last[ix]
        self.last[ix] = self.t
        m = self.m[ix] * self.beta1 ** (dt - 1)
        v = self.v[ix] * self.beta2 ** (dt - 1)
        m = self.beta1 * m + (1 - self.beta1) * grad
        v = self.beta2 * v + (1 - self.beta2) * grad * grad
        self.m[ix] = m
        self.v[ix] = v
        mhat = m / (1 - self.beta1 ** self.t)
        vhat = v / (1 - self.beta2 ** self.t)
        weights[ix] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _Sgd:
    def __init__(self, dim: int, lr: float):
        self.lr = lr

    def update(self, weights: np.ndarray, ix: np.ndarray, grad: np.ndarray) -> None:
        weights[ix] -= self.lr * grad


def set_size_weights(sizes: Sequence[int]) -> np.ndarray:
    """Per-set loss weights: set size over the mean size. They average 1."""
    arr = np.asarray(sizes, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no sets")
    return arr / arr.mean()


def train(
    train_sets: Sequence[tuple[CandidateSet, Sequence[float]]],
    dev_sets: Sequence[tuple[CandidateSet, Sequence[float]]],
    feature_config: FeatureConfig | None = None,
    config: TrainConfig | None = None,
    gamma: float = 0.1,
    weight_mode: str = "uniform",
) -> RerankerModel:
    """Fit reranker weights by per-set subgradient steps on the margin loss.

    One candidate set is one batch. Dev loss is tracked every epoch and the
    parameters with the smallest dev loss are returned; training stops early
    once ``patience`` epochs pass without improvement. With ``two_phase``,
    only the bias and dedicated length slots learn until ``unfreeze_epoch``
    epochs have run, then the full weight vector is unfrozen.
    """
    feature_config = feature_config or FeatureConfig()
    config = config or TrainConfig()
    if weight_mode not in ("uniform", "set-size"):
        raise ValueError(f"unknown weight_mode {weight_mode!r}")
    if not train_sets:
        raise ValueError("no training sets")
    if not dev_sets:
        raise ValueError("no dev sets")

    cache = [_FeaturizedSet(cs, gold, feature_config) for cs, gold in train_sets]
    dev_cache = [_FeaturizedSet(cs, gold, feature_config) for cs, gold in dev_sets]
    if weight_mode == "set-size":
        for fs, w in zip(cache, set_size_weights([fs.n for fs in cache])):
            fs.weight = float(w)

    weights = np.zeros(feature_config.hash_dim)
    bias = 0.0
    dim = feature_config.hash_dim
    optimizer = (_Adam(dim, config.learning_rate) if config.optimizer == "adaptive-moment"
                 else _Sgd(dim, config.learning_rate))
    rng = np.random.default_rng(config.seed)

    def dev_loss() -> float:
        total = 0.0
        for fs in dev_cache:
            total += set_loss(fs.gold, fs.scores(weights, bias), gamma)
        return total / len(dev_cache)

    best_loss = np.inf
    best_weights = weights.copy()
    best_epoch = 0
    stale = 0
    epochs_run = 0
    for epoch in range(1, config.max_epochs + 1):
        epochs_run = epoch
        frozen = config.two_phase and epoch <= config.unfreeze_epoch
        order = rng.permutation(len(cache)) if config.shuffle else np.arange(len(cache))
        for set_index in order:
            fs = cache[set_index]
            coef = _pair_coefficients(fs.gold, fs.scores(weights, bias), gamma) * fs.weight
            if not coef.any():
                continue
            grad = fs.grad_unique(coef)
            ix = fs.uix
            if frozen:
                mask = ix < NUM_RESERVED
                ix, grad = ix[mask], grad[mask]
            live = grad != 0.0
            if live.any():
                optimizer.update(weights, ix[live], grad[live])
        loss = dev_loss()
        if loss < best_loss:
            best_loss = loss
            best_weights = weights.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    meta = {
        "seed": config.seed,
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "best_dev_loss": float(best_loss),
        "optimizer": config.optimizer,
        "weight_mode": weight_mode,
    }
    return RerankerModel(weights=best_weights, bias=bias, feature_config=feature_config,
                         gamma=gamma, train_meta=meta)
