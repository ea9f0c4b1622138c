"""Binary OOD detector trained on InD data versus filtered outliers, plus metrics."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, softmax
from scipy.stats import rankdata

from .data import LabeledDataset
from .errors import MedixError
from .gradients import IndModel
from .rng import CounterRNG


@dataclass
class OodDetector:
    """``g(x) = w . (x - center) / scale + b``; positive means InD."""

    w: np.ndarray
    b: float
    center: np.ndarray
    scale: np.ndarray
    threshold: float = 0.0
    meta: dict = field(default_factory=dict)

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if not np.all(np.isfinite(X)):
            raise MedixError("non-finite features")
        return ((X - self.center) / self.scale) @ self.w + self.b

    def is_ind(self, X) -> np.ndarray:
        return self.score(X) > self.threshold


def score(det: OodDetector, x) -> np.ndarray:
    return det.score(x)


def _softplus(z):
    return np.logaddexp(0.0, z)


def detector_loss(det: OodDetector, ind_feats, outlier_feats) -> float:
    """Smooth surrogate: mean softplus(-g) over InD plus mean softplus(g) over outliers."""
    return float(np.mean(_softplus(-det.score(ind_feats))) + np.mean(_softplus(det.score(outlier_feats))))


def zero_one_loss(det: OodDetector, ind_feats, outlier_feats) -> float:
    """Indicator version: InD scored at or below 0 plus outliers scored above 0."""
    return float(np.mean(det.score(ind_feats) <= 0) + np.mean(det.score(outlier_feats) > 0))


def train_ood_detector(
    ind_feats,
    outlier_feats,
    lr: float = 0.1,
    epochs: int = 200,
    ind_loss_weight: float = 10.0,
    seed: int = 0,
    ind_labels=None,
    batch: int = 64,
) -> OodDetector:
    """Fit the linear detector by mini-batch gradient descent.

    The binary objective is class balanced.  When ``ind_loss_weight > 0`` and
    ``ind_labels`` are given, a separate multiclass softmax head is trained on
    the InD rows at the same time, with the binary term scaled by
    ``ind_loss_weight``.  With ``ind_loss_weight == 0`` only the binary term is
    used.
    """
    X_in = np.atleast_2d(np.asarray(ind_feats, dtype=np.float64))
    X_out = np.atleast_2d(np.asarray(outlier_feats, dtype=np.float64))
    if X_out.size == 0 or len(X_out) == 0:
        raise MedixError("no candidate outliers; run filter first")
    if X_in.size == 0:
        raise MedixError("no InD samples")
    if not (np.all(np.isfinite(X_in)) and np.all(np.isfinite(X_out))):
        raise MedixError("non-finite features")
    if ind_loss_weight < 0:
        raise MedixError("ind_loss_weight must be non-negative")

    both = np.vstack([X_in, X_out])
    center = both.mean(axis=0)
    scale = both.std(axis=0)
    scale[scale == 0] = 1.0
    Z_in = (X_in - center) / scale
    Z_out = (X_out - center) / scale
    p = Z_in.shape[1]
    w = np.zeros(p)
    b = 0.0

    use_head = ind_loss_weight > 0 and ind_labels is not None
    bin_weight = ind_loss_weight if use_head else 1.0
    if use_head:
        y = np.asarray(ind_labels, dtype=np.int64)
        K = int(y.max()) + 1
        V = np.zeros((K, p))
        c = np.zeros(K)

    rng = CounterRNG(seed)
    n_in, n_out = len(Z_in), len(Z_out)
    n_batches = max(1, -(-max(n_in, n_out) // batch))
    history = []
    for _ in range(epochs):
        perm_in = np.array_split(rng.permutation(n_in), n_batches)
        perm_out = np.array_split(rng.permutation(n_out), n_batches)
        for bi, bo in zip(perm_in, perm_out):
            gw = np.zeros(p)
            gb = 0.0
            if len(bi):
                s_in = expit(-(Z_in[bi] @ w + b))  # d/dg softplus(-g) = -sigmoid(-g)
                gw -= s_in @ Z_in[bi] / len(bi)
                gb -= s_in.mean()
            if len(bo):
                s_out = expit(Z_out[bo] @ w + b)
                gw += s_out @ Z_out[bo] / len(bo)
                gb += s_out.mean()
            w -= lr * bin_weight * gw
            b -= lr * bin_weight * gb
            if use_head and len(bi):
                P = softmax(Z_in[bi] @ V.T + c, axis=1)
                P[np.arange(len(bi)), y[bi]] -= 1.0
                V -= lr * P.T @ Z_in[bi] / len(bi)
                c -= lr * P.mean(axis=0)
        det = OodDetector(w.copy(), float(b), center, scale)
        history.append(detector_loss(det, X_in, X_out))

    meta = {"lr": lr, "epochs": epochs, "ind_loss_weight": ind_loss_weight, "seed": seed, "loss_history": history}
    if use_head:
        meta["ind_head_loss"] = float(-np.mean(log_softmax(Z_in @ V.T + c, axis=1)[np.arange(n_in), y]))
    return OodDetector(w, float(b), center, scale, meta=meta)


# --- metrics -------------------------------------------------------------------------


def _check_scores(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise MedixError("empty score list")
    return a, b


def fpr_at_tpr(scores_in, scores_out, tpr_target: float = 0.95) -> float:
    """OOD false-positive rate at the highest threshold keeping InD TPR >= target.

    A sample counts as InD when its score is at or above the threshold.
    """
    s_in, s_out = _check_scores(scores_in, scores_out)
    if not 0 < tpr_target <= 1:
        raise MedixError("tpr_target must lie in (0, 1]")
    n = len(s_in)
    desc = np.sort(s_in)[::-1]
    k = int(np.argmax(np.arange(1, n + 1) / n >= tpr_target)) + 1
    thr = desc[k - 1]
    return float(np.mean(s_out >= thr))


def auroc(scores_in, scores_out) -> float:
    """P(in > out) + P(tie)/2 through the Mann-Whitney rank sum."""
    s_in, s_out = _check_scores(scores_in, scores_out)
    n1, n2 = len(s_in), len(s_out)
    ranks = rankdata(np.concatenate([s_in, s_out]))
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n2))


def ind_accuracy(model: IndModel, test: LabeledDataset) -> float:
    if len(test) == 0:
        raise MedixError("empty test set")
    pred = np.argmax(model.logits(test.features), axis=1)
    return float(np.mean(pred == test.labels))


@dataclass
class DetectionMetrics:
    fpr95: float | None
    auroc: float | None
    ind_acc: float
    err_in: float | None
    err_out: float | None
    tpr: float = 0.95

    FIELDS = ("fpr95", "auroc", "ind_acc", "err_in", "err_out")

    def row(self) -> list[str]:
        return ["" if getattr(self, f) is None else repr(float(getattr(self, f))) for f in self.FIELDS]

    def table(self) -> str:
        lines = []
        for f in self.FIELDS:
            v = getattr(self, f)
            lines.append(f"{f:<8} {'undefined' if v is None else f'{v:.4f}'}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_detector(det: OodDetector, test_ind, test_ood, model: IndModel | None = None,
                      test: LabeledDataset | None = None, err=None) -> DetectionMetrics:
    s_in, s_out = det.score(test_ind), det.score(test_ood)
    acc = ind_accuracy(model, test) if model is not None and test is not None else float("nan")
    err = err or {"err_in": None, "err_out": None}
    return DetectionMetrics(fpr_at_tpr(s_in, s_out), auroc(s_in, s_out), acc, err["err_in"], err["err_out"])


def write_metrics_csv(path, metrics: DetectionMetrics) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DetectionMetrics.FIELDS)
        w.writerow(metrics.row())
