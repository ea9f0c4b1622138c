"""InD classifier, per-sample loss gradients and gradient diagnostics.

The classifier is multinomial logistic regression on a (possibly fixed,
nonlinear) feature map.  Gradients are taken with respect to the final
linear layer only: for a sample with softmax output ``p`` and one-hot label
``e`` the weight gradient is ``(p - e) phi(x)^T``, flattened class-major.
Bias gradients ``p - e`` are appended only when ``include_bias`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, ndtri, softmax

from .data import LabeledDataset, WildSet
from .errors import MedixError
from .rng import CounterRNG


@dataclass(frozen=True)
class RBFFeatures:
    """Fixed Gaussian bumps ``exp(-|x - c|^2 / (2 h^2))`` around ``centers``."""

    centers: np.ndarray
    bandwidth: float

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        sq = np.sum((X[:, None, :] - self.centers[None, :, :]) ** 2, axis=2)
        return np.exp(-sq / (2.0 * self.bandwidth**2))

    @classmethod
    def from_data(cls, X, n_centers: int, bandwidth: float, seed: int) -> "RBFFeatures":
        X = np.asarray(X, dtype=np.float64)
        n_centers = min(n_centers, len(X))
        rows = np.sort(CounterRNG(seed).choice(len(X), n_centers))
        return cls(X[rows].copy(), float(bandwidth))


@dataclass
class IndModel:
    W: np.ndarray  # (K, q)
    b: np.ndarray  # (K,)
    include_bias: bool = False
    features: RBFFeatures | None = None
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.W.shape[0]

    @property
    def grad_dim(self) -> int:
        return self.W.size + (self.K if self.include_bias else 0)

    def embed(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if not np.all(np.isfinite(X)):
            raise MedixError("non-finite features")
        return self.features(X) if self.features is not None else X

    def logits(self, X) -> np.ndarray:
        return self.embed(X) @ self.W.T + self.b

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X), axis=1)


def _cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(log_softmax(logits, axis=1)[np.arange(len(y)), y]))


def train_ind_classifier(
    data: LabeledDataset,
    lr: float = 0.1,
    epochs: int = 200,
    batch: int = 64,
    seed: int = 0,
    features: RBFFeatures | None = None,
    include_bias: bool = False,
    weight_decay: float = 0.0,
) -> IndModel:
    """Mini-batch gradient descent on mean cross-entropy, starting from zero."""
    data.validate_trainable()
    if lr <= 0 or epochs < 1 or batch < 1:
        raise MedixError("need lr > 0, epochs >= 1, batch >= 1")
    F = features(data.features) if features is not None else data.features
    n, q = F.shape
    K = data.K
    W = np.zeros((K, q))
    b = np.zeros(K)
    y = data.labels
    rng = CounterRNG(seed)
    losses = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            idx = perm[start : start + batch]
            P = softmax(F[idx] @ W.T + b, axis=1)
            P[np.arange(len(idx)), y[idx]] -= 1.0
            W -= lr * (P.T @ F[idx] / len(idx) + weight_decay * W)
            b -= lr * P.mean(axis=0)
        losses.append(_cross_entropy(F @ W.T + b, y))
    meta = {"epochs": epochs, "lr": lr, "batch": batch, "seed": seed, "final_loss": losses[-1]}
    model = IndModel(W, b, include_bias=include_bias, features=features, meta=meta)
    model.meta["loss_history"] = losses
    return model


def per_sample_gradients(model: IndModel, X, y) -> np.ndarray:
    """Row ``i`` is the cross-entropy gradient of sample ``(X[i], y[i])``."""
    F = model.embed(X)
    y = np.asarray(y, dtype=np.int64).ravel()
    if len(y) != len(F):
        raise MedixError("features and labels disagree in length")
    if len(y) and (y.min() < 0 or y.max() >= model.K):
        raise MedixError(f"labels must lie in [0, {model.K})")
    P = softmax(F @ model.W.T + model.b, axis=1)
    P[np.arange(len(y)), y] -= 1.0
    G = (P[:, :, None] * F[:, None, :]).reshape(len(y), -1)
    if model.include_bias:
        G = np.concatenate([G, P], axis=1)
    return G


def per_sample_gradient(model: IndModel, x, y: int) -> np.ndarray:
    return per_sample_gradients(model, np.atleast_2d(x), [y])[0]


def sample_loss(model: IndModel, x, y: int) -> float:
    """Cross-entropy of one sample; used by finite-difference checks."""
    return _cross_entropy(model.logits(np.atleast_2d(x)), np.array([y]))


def reference_gradient(model: IndModel, data: LabeledDataset) -> np.ndarray:
    """Mean per-sample gradient over labeled InD data."""
    if len(data) == 0:
        raise MedixError("empty dataset")
    return per_sample_gradients(model, data.features, data.labels).mean(axis=0)


def pseudo_label(model: IndModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Argmax class (lowest id on ties) and max-softmax confidence."""
    P = model.predict_proba(X)
    return np.argmax(P, axis=1), P.max(axis=1)


def compute_wild_gradients(model: IndModel, wild: WildSet) -> WildSet:
    labels, _ = pseudo_label(model, wild.features)
    return wild.with_gradients(per_sample_gradients(model, wild.features, labels), labels)


@dataclass
class Prefiltered:
    wild: WildSet
    removed_fraction: float


def confidence_prefilter(model: IndModel, wild: WildSet, threshold: float) -> Prefiltered:
    """Keep wild samples whose max-softmax confidence is at least ``threshold``."""
    if not 0.0 <= threshold <= 1.0 + 1e-9:
        raise MedixError("threshold must lie in [0, 1]")
    _, conf = pseudo_label(model, wild.features)
    keep = np.flatnonzero(conf >= threshold)
    removed = 1.0 - len(keep) / len(wild) if len(wild) else 0.0
    return Prefiltered(wild.subset(keep), removed)


@dataclass
class Diagnostics:
    counts: np.ndarray
    edges: np.ndarray
    qq_pairs: np.ndarray | None  # (m, 2): theoretical, empirical
    qq_error: str | None = None


def subgaussian_diagnostics(G, coord: int, bins: int = 30) -> Diagnostics:
    """Histogram and normal Q-Q pairs for one gradient coordinate.

    Plotting positions are ``(k - 0.5) / m``; the empirical side is the sorted
    column standardized by its sample mean and standard deviation.
    """
    if bins < 2:
        raise MedixError("bins must be >= 2")
    col = np.asarray(G, dtype=np.float64)[:, coord]
    lo, hi = col.min(), col.max()
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(col, bins=bins, range=(lo, hi))
    sd = col.std(ddof=1) if len(col) > 1 else 0.0
    if sd == 0.0:
        return Diagnostics(counts, edges, None, "degenerate column")
    m = len(col)
    theo = ndtri((np.arange(1, m + 1) - 0.5) / m)
    emp = np.sort((col - col.mean()) / sd)
    return Diagnostics(counts, edges, np.column_stack([theo, emp]))


def estimate_sigma(G) -> float:
    """Conservative sub-Gaussian proxy: the largest per-coordinate sample std."""
    G = np.asarray(G, dtype=np.float64)
    return float(np.max(G.std(axis=0, ddof=1)))


# --- checkpoints ---------------------------------------------------------------


def save_model(path, model: IndModel) -> None:
    """One metadata line, then one CSV row per class: ``b_k, W_k...``."""
    meta = {k: v for k, v in model.meta.items() if k != "loss_history"}
    head = ";".join(f"{k}={v}" for k, v in sorted(meta.items()))
    with open(path, "w") as fh:
        fh.write(f"# K={model.K};q={model.W.shape[1]};include_bias={int(model.include_bias)};{head}\n")
        for bk, row in zip(model.b, model.W):
            fh.write(",".join(repr(float(v)) for v in (bk, *row)) + "\n")
        if model.features is not None:
            fh.write(f"# rbf bandwidth={model.features.bandwidth!r}\n")
            for c in model.features.centers:
                fh.write(",".join(repr(float(v)) for v in c) + "\n")


def load_model(path) -> IndModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# "):
        raise MedixError(f"{path}: missing metadata header")
    meta = dict(kv.split("=", 1) for kv in lines[0][2:].split(";") if "=" in kv)
    K = int(meta.pop("K"))
    include_bias = bool(int(meta.pop("include_bias")))
    meta.pop("q", None)
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1 : 1 + K]])
    features = None
    if len(lines) > 1 + K:
        bw = float(lines[1 + K].split("=", 1)[1])
        centers = np.array([[float(v) for v in ln.split(",")] for ln in lines[2 + K :]])
        features = RBFFeatures(centers, bw)
    return IndModel(rows[:, 1:].copy(), rows[:, 0].copy(), include_bias, features, meta)
