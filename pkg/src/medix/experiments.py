"""End-to-end experiment drivers shared by the CLI and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .data import IND, WildSet
from .detector import DetectionMetrics, OodDetector, evaluate_detector, ind_accuracy, train_ood_detector
from .errors import MedixError
from .filter import FilterConfig, FilterResult, deviation_sweep, err_rates, medix_filter
from .gradients import (
    IndModel,
    RBFFeatures,
    compute_wild_gradients,
    reference_gradient,
    train_ind_classifier,
)
from .synth import MixtureSpec, World, gaussian_world, simulate_gradient_world


# --- 2-D Gaussian mixture -----------------------------------------------------


@dataclass
class Synth2dParams:
    spec: MixtureSpec = field(default_factory=MixtureSpec)
    n_centers: int = 30
    bandwidth: float = 1.0
    include_bias: bool = True
    lr: float = 0.1
    epochs: int = 200
    batch: int = 64
    k_frac: float = 0.5
    eps_stop: float = 5e-3
    T: int = 40
    stop_rule: str = "drop"
    workers: int = 1
    det_lr: float = 0.1
    det_epochs: int = 200
    ind_loss_weight: float = 10.0


@dataclass
class Synth2dRun:
    world: World
    model: IndModel
    ref: np.ndarray
    wild: WildSet
    result: FilterResult
    detector: OodDetector | None
    metrics: DetectionMetrics
    ood_recall: float | None
    ind_share_of_flagged: float | None
    train_acc: float


def run_synth2d(p: Synth2dParams) -> Synth2dRun:
    """Train the InD classifier, filter the wild set, train and score the detector.

    The classifier sits on a fixed RBF layer (centers drawn from the training
    inputs), which plays the part of a penultimate feature layer.
    """
    world = gaussian_world(p.spec)
    feats = RBFFeatures.from_data(world.train.features, p.n_centers, p.bandwidth, seed=p.spec.seed + 1)
    model = train_ind_classifier(world.train, lr=p.lr, epochs=p.epochs, batch=p.batch,
                                 seed=p.spec.seed + 2, features=feats, include_bias=p.include_bias)
    ref = reference_gradient(model, world.train)
    wild = compute_wild_gradients(model, world.wild)
    m = len(wild)
    k = max(1, int(p.k_frac * m))
    cfg = FilterConfig(eps_stop=p.eps_stop, k=min(k, m - 1), T=p.T, stop_rule=p.stop_rule, workers=p.workers)
    result = medix_filter(wild, ref, cfg)
    err = err_rates(result, wild)
    flagged = wild.features[result.outlier_ids]
    if len(flagged):
        det = train_ood_detector(world.train.features, flagged, lr=p.det_lr, epochs=p.det_epochs,
                                 ind_loss_weight=p.ind_loss_weight, seed=p.spec.seed + 3,
                                 ind_labels=world.train.labels)
        metrics = evaluate_detector(det, world.test_ind.features, world.test_ood, model, world.test_ind, err)
    else:
        # nothing to contrast against; the detector metrics are undefined
        det = None
        metrics = DetectionMetrics(None, None, ind_accuracy(model, world.test_ind), err["err_in"], err["err_out"])
    recall = None if err["err_out"] is None else 1.0 - err["err_out"]
    n_flag = len(result.outlier_ids)
    ind_share = float(np.mean(wild.origin[result.outlier_ids] == IND)) if n_flag else None
    train_acc = float(np.mean(np.argmax(model.logits(world.train.features), axis=1) == world.train.labels))
    return Synth2dRun(world, model, ref, wild, result, det, metrics, recall, ind_share, train_acc)


# --- raw gradient worlds ------------------------------------------------------------


@dataclass
class SweepParams:
    d: int = 20
    sigma: float = 1.0
    Delta: float = 1.0
    m_in: int = 500
    n_steps: int = 10
    max_ood: int = 900
    seed: int = 0


def run_sweep(p: SweepParams) -> tuple[list[tuple[int, float]], float]:
    """Deviation of the EWM from the reference as OOD rows are injected.

    The reference is the mean of a separate InD draw (standing in for the
    labeled training gradients).  Returns the series and its Spearman rho.
    """
    mu = np.zeros(p.d)
    G_in, _ = simulate_gradient_world(mu, p.sigma, 0.0, 0.0, p.m_in, p.d, seed=p.seed)
    G_ref, _ = simulate_gradient_world(mu, p.sigma, 0.0, 0.0, p.m_in, p.d, seed=p.seed + 10_000)
    G_ood, _ = simulate_gradient_world(mu, p.sigma, p.Delta, 1.0, p.max_ood, p.d, seed=p.seed + 20_000)
    steps = np.linspace(0, p.max_ood, p.n_steps).round().astype(int).tolist()
    series = deviation_sweep(G_in, G_ood, G_ref.mean(axis=0), steps)
    rho = spearmanr([s for s, _ in series], [v for _, v in series]).statistic
    return series, float(rho)


@dataclass
class CompareParams:
    d: int = 20
    sigma: float = 1.0
    Delta: float = 1.0
    m_in: int = 200
    ood_levels: tuple = (20, 40, 80, 120, 160)
    k: int = 10
    eps_stop: float = 0.02
    T: int = 40
    seed: int = 0


def run_ewm_vs_gm(p: CompareParams) -> list[dict]:
    """Filter the same wild sets with each aggregator; one row per (level, aggregator)."""
    rows = []
    mu = np.zeros(p.d)
    for level in p.ood_levels:
        m = p.m_in + level
        G, origin = simulate_gradient_world(mu, p.sigma, p.Delta, level / m, m, p.d, seed=p.seed * 1000 + level)
        wild = WildSet(features=None, origin=origin, gradients=G)
        for agg in ("ewm", "gm"):
            cfg = FilterConfig(eps_stop=p.eps_stop, k=p.k, T=p.T, aggregator=agg)
            res = medix_filter(wild, mu, cfg)
            err = err_rates(res, wild)
            rows.append({
                "n_ood": level,
                "aggregator": agg,
                "d_0": res.trace[0].d_t,
                "removed": len(res.outlier_ids),
                "ood_removed": 1.0 - err["err_out"],
                "err_in": err["err_in"],
            })
    return rows


# --- hyperparameter sensitivity ---------------------------------------------------

EPS_GRID = (5e-5, 5e-4, 5e-3, 5e-2)
K_FRACS = (0.08, 0.14, 0.2, 0.4)


def run_hyper_sweep(base: Synth2dParams, eps_grid=EPS_GRID, k_fracs=K_FRACS, dry_run=False) -> list[dict]:
    """One synth2d run per (k fraction, eps_stop) pair; ``dry_run`` only validates the grids."""
    for e in eps_grid:
        if not e > 0:
            raise MedixError(f"invalid eps_stop grid value {e}")
    for f in k_fracs:
        if not 0 < f < 1:
            raise MedixError(f"invalid k fraction {f}")
    if dry_run:
        return []
    rows = []
    for f in k_fracs:
        for e in eps_grid:
            p = Synth2dParams(**{**base.__dict__, "k_frac": f, "eps_stop": e})
            run = run_synth2d(p)
            rows.append({
                "k_frac": f,
                "eps_stop": e,
                "k": max(1, int(f * len(run.wild))),
                "fpr95": run.metrics.fpr95,
                "auroc": run.metrics.auroc,
                "err_in": run.metrics.err_in,
                "err_out": run.metrics.err_out,
            })
    return rows


__all__ = [
    "CompareParams",
    "EPS_GRID",
    "K_FRACS",
    "SweepParams",
    "Synth2dParams",
    "Synth2dRun",
    "run_ewm_vs_gm",
    "run_hyper_sweep",
    "run_sweep",
    "run_synth2d",
]
