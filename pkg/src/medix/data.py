"""Dataset containers shared by the training, filtering and synthesis code."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import MedixError

IND, OOD = 0, 1


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (n, p)
    labels: np.ndarray  # (n,) ints in [0, K)
    K: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise MedixError("features must be (n, p) and labels (n,)")
        if not np.all(np.isfinite(X)):
            raise MedixError("non-finite features")
        if len(y) and (y.min() < 0 or y.max() >= self.K):
            raise MedixError(f"labels must lie in [0, {self.K})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))

    def __len__(self) -> int:
        return len(self.labels)

    def validate_trainable(self) -> None:
        if len(self) < self.K or self.K < 2:
            raise MedixError("need at least K >= 2 samples")
        if len(np.unique(self.labels)) < 2:
            raise MedixError("degenerate dataset: a single class")


@dataclass(frozen=True)
class WildSet:
    """Unlabeled samples plus evaluation-only origin tags (0 = InD, 1 = OOD).

    ``ids`` are the positions in the original wild set, so subsets keep
    their provenance.  ``gradients`` is filled once a model is available.
    """

    features: np.ndarray | None
    origin: np.ndarray | None
    pseudo_labels: np.ndarray | None = None
    gradients: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        sizes = {len(a) for a in (self.features, self.origin, self.pseudo_labels, self.gradients) if a is not None}
        if len(sizes) > 1:
            raise MedixError(f"wild set arrays disagree in length: {sorted(sizes)}")
        if self.ids is None:
            n = sizes.pop() if sizes else 0
            object.__setattr__(self, "ids", np.arange(n))

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, rows) -> "WildSet":
        rows = np.asarray(rows, dtype=np.intp)
        pick = lambda a: None if a is None else a[rows]
        return WildSet(
            features=pick(self.features),
            origin=pick(self.origin),
            pseudo_labels=pick(self.pseudo_labels),
            gradients=pick(self.gradients),
            ids=self.ids[rows],
        )

    def with_gradients(self, gradients, pseudo_labels=None) -> "WildSet":
        return replace(self, gradients=gradients, pseudo_labels=pseudo_labels if pseudo_labels is not None else self.pseudo_labels)

    @property
    def m_in(self) -> int:
        return int(np.sum(self.origin == IND))

    @property
    def m_out(self) -> int:
        return int(np.sum(self.origin == OOD))


def write_dataset_csv(path, data: LabeledDataset) -> None:
    p = data.features.shape[1]
    with open(path, "w") as fh:
        fh.write("label," + ",".join(f"x{j}" for j in range(p)) + "\n")
        for y, row in zip(data.labels, data.features):
            fh.write(f"{int(y)}," + ",".join(repr(float(v)) for v in row) + "\n")


def read_dataset_csv(path, K: int | None = None) -> LabeledDataset:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        if not fh.readline().startswith("label"):
            raise MedixError(f"{path}: first column must be 'label'")
    y = raw[:, 0].astype(np.int64)
    return LabeledDataset(raw[:, 1:], y, int(K if K is not None else y.max() + 1))


def write_wild_csv(path, wild: WildSet) -> None:
    """Wild features with the evaluation-only ``__origin`` column last."""
    X = wild.features
    with open(path, "w") as fh:
        fh.write("id," + ",".join(f"x{j}" for j in range(X.shape[1])) + ",__origin\n")
        for i, row, o in zip(wild.ids, X, wild.origin):
            fh.write(f"{int(i)}," + ",".join(repr(float(v)) for v in row) + f",{int(o)}\n")
