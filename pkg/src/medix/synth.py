"""Synthetic worlds: the 2-D Gaussian mixture and raw gradient simulators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import IND, OOD, LabeledDataset, WildSet
from .errors import ConfigError, MedixError
from .rng import CounterRNG

SQRT3 = math.sqrt(3.0)


def _default_means() -> list[list[float]]:
    return [[-2.0, 0.0], [2.0, 0.0], [0.0, 2.0 * SQRT3]]


@dataclass(frozen=True)
class MixtureSpec:
    """Three InD Gaussian classes plus one OOD Gaussian, isotropic covariances.

    ``n_per_class`` samples per class are drawn for each of the training split,
    the InD part of the wild set and the held-out InD test split; ``n_ood``
    OOD samples are drawn for the wild set and again for the test split.

    Setting ``pi`` keeps the wild size at ``K * n_per_class + n_ood`` but
    redraws its composition with ``ceil(pi * m)`` OOD rows, from a separate
    stream so the training and test splits are unchanged.
    """

    class_means: list = field(default_factory=_default_means)
    cov_scale: float = 0.25
    ood_mean: list = field(default_factory=lambda: [20.0, 2.0 * SQRT3])
    ood_cov_scale: float = 0.25
    n_per_class: int = 200
    n_ood: int = 600
    seed: int = 0
    pi: float | None = None

    def validate(self) -> None:
        dims = {len(mu) for mu in self.class_means} | {len(self.ood_mean)}
        if len(dims) != 1:
            raise MedixError("dimension mismatch between class and OOD means")
        if len(self.class_means) < 2:
            raise MedixError("need at least two classes")
        if self.cov_scale < 0 or self.ood_cov_scale < 0:
            raise MedixError("covariance scales must be non-negative")
        if self.n_per_class < 1 or self.n_ood < 1:
            raise MedixError("sample counts must be at least 1")
        if self.pi is not None and not 0 <= self.pi <= 1:
            raise MedixError("pi must lie in [0, 1]")


@dataclass
class World:
    train: LabeledDataset
    wild: WildSet
    test_ind: LabeledDataset
    test_ood: np.ndarray


def _draw_classes(rng: CounterRNG, means: np.ndarray, scale: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    K, p = means.shape
    noise = rng.normal((K * n, p)) * math.sqrt(scale)
    X = np.repeat(means, n, axis=0) + noise
    return X, np.repeat(np.arange(K), n)


def gaussian_world(spec: MixtureSpec | None = None) -> World:
    """Training split, wild mixture and held-out test draws (all disjoint)."""
    spec = spec or MixtureSpec()
    spec.validate()
    rng = CounterRNG(spec.seed)
    means = np.asarray(spec.class_means, dtype=np.float64)
    ood_mu = np.asarray(spec.ood_mean, dtype=np.float64)
    K = len(means)

    X_tr, y_tr = _draw_classes(rng, means, spec.cov_scale, spec.n_per_class)
    X_wi, _ = _draw_classes(rng, means, spec.cov_scale, spec.n_per_class)
    X_wo = ood_mu + rng.normal((spec.n_ood, len(ood_mu))) * math.sqrt(spec.ood_cov_scale)
    X_te, y_te = _draw_classes(rng, means, spec.cov_scale, spec.n_per_class)
    X_to = ood_mu + rng.normal((spec.n_ood, len(ood_mu))) * math.sqrt(spec.ood_cov_scale)

    if spec.pi is not None:
        X_wi, X_wo = _redraw_wild(rng.spawn(1), spec, means, ood_mu)
    X_w = np.vstack([X_wi, X_wo])
    origin = np.r_[np.full(len(X_wi), IND), np.full(len(X_wo), OOD)]
    perm = rng.permutation(len(X_w))
    wild = WildSet(features=X_w[perm], origin=origin[perm])
    return World(LabeledDataset(X_tr, y_tr, K), wild, LabeledDataset(X_te, y_te, K), X_to)


def _redraw_wild(rng: CounterRNG, spec: MixtureSpec, means: np.ndarray, ood_mu: np.ndarray):
    K, p = means.shape
    m = K * spec.n_per_class + spec.n_ood
    n_out = math.ceil(spec.pi * m)
    n_in = m - n_out
    labels = np.arange(n_in) % K  # classes stay as balanced as the count allows
    X_in = means[labels] + rng.normal((n_in, p)) * math.sqrt(spec.cov_scale)
    X_out = ood_mu + rng.normal((n_out, p)) * math.sqrt(spec.ood_cov_scale)
    return X_in, X_out


def make_wild(ind_pool, ood_pool, pi: float, m: int, seed: int) -> WildSet:
    """Huber mixture: ``floor((1 - pi) m)`` InD and ``ceil(pi m)`` OOD rows, shuffled."""
    if not 0 < pi <= 1:
        raise MedixError("pi must lie in (0, 1]")
    ind_pool = np.asarray(ind_pool, dtype=np.float64)
    ood_pool = np.asarray(ood_pool, dtype=np.float64)
    n_out = math.ceil(pi * m)
    n_in = m - n_out
    if n_in > len(ind_pool) or n_out > len(ood_pool):
        raise MedixError(f"insufficient pool: need {n_in} InD and {n_out} OOD samples")
    rng = CounterRNG(seed)
    X = np.vstack([ind_pool[rng.choice(len(ind_pool), n_in)], ood_pool[rng.choice(len(ood_pool), n_out)]])
    origin = np.r_[np.full(n_in, IND), np.full(n_out, OOD)]
    perm = rng.permutation(m)
    return WildSet(features=X[perm], origin=origin[perm])


def realized_pi(wild: WildSet) -> float:
    return float(np.mean(wild.origin == OOD))


def _noise(rng: CounterRNG, shape, tail) -> np.ndarray:
    """Unit-variance noise from the requested tail family."""
    if tail == "gaussian":
        return rng.normal(shape)
    if isinstance(tail, tuple) and tail[0] == "student_t":
        nu = int(tail[1])
        if nu <= 4:
            raise MedixError("fourth moment unbounded")
        return rng.standard_t(nu, shape) / math.sqrt(nu / (nu - 2))
    raise MedixError(f"unknown tail family {tail!r}")


def simulate_gradient_world(mu_in, sigma: float, Delta: float, pi: float, m: int, d: int,
                            tail="gaussian", seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Raw gradient rows: InD around ``mu_in``, OOD shifted by exactly ``Delta sqrt(d)`` in l2.

    ``tail`` is ``"gaussian"`` or ``("student_t", nu)``; either way each
    coordinate has standard deviation ``sigma``.  Returns ``(G, origin)``.
    """
    mu_in = np.asarray(mu_in, dtype=np.float64)
    if mu_in.shape != (d,):
        raise MedixError("mu_in must have length d")
    if Delta < 0 or sigma < 0:
        raise MedixError("Delta and sigma must be non-negative")
    if not 0 <= pi <= 1:
        raise MedixError("pi must lie in [0, 1]")
    rng = CounterRNG(seed)
    n_out = math.ceil(pi * m)
    n_in = m - n_out
    u = rng.unit_vector(d)
    mu_out = mu_in + Delta * math.sqrt(d) * u
    G = np.vstack([mu_in + sigma * _noise(rng, (n_in, d), tail),
                   mu_out + sigma * _noise(rng, (n_out, d), tail)])
    origin = np.r_[np.full(n_in, IND), np.full(n_out, OOD)]
    perm = rng.permutation(m)
    return G[perm], origin[perm]


# --- key-value config ------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment; blank lines ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse_vectors(text: str) -> list[list[float]]:
    """``"-2,0; 2,0; 0,3.46"`` -> list of vectors."""
    try:
        return [[float(v) for v in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad vector list {text!r}") from exc
