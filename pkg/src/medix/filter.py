"""Greedy leave-one-out outlier extraction from a wild gradient set.

Each iteration measures ``d_t = |agg(G_S) - ref|`` for the live set ``S`` and
scores every live row by how much its removal would shrink that distance,
``delta_i = d_t - |agg(G_{S minus i}) - ref|``.  The ``k`` best rows are taken
out together.  ``agg`` is the element-wise median by default; the geometric
median is available as a baseline.

Two stopping rules are supported:

``"drop"`` (default)
    A removed batch is only kept if the distance fell by more than
    ``eps_stop`` once it was gone.  The first batch that fails this test is
    put back and the loop ends.
``"delta"``
    Stop as soon as the best single-row score ``delta_max`` is at most
    ``eps_stop``; otherwise remove the batch unconditionally.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import IND, OOD, WildSet
from .errors import MedixError
from .stats import (
    as_gradient_matrix,
    build_column_index,
    element_wise_median,
    geometric_median,
    l2_distance,
    loo_geometric_medians,
    loo_medians,
    row_distances,
)

STOP_RULES = ("drop", "delta")
AGGREGATORS = ("ewm", "gm")


@dataclass(frozen=True)
class FilterConfig:
    eps_stop: float = 5e-3
    k: int = 1
    T: int = 40
    stop_rule: str = "drop"
    aggregator: str = "ewm"
    naive: bool = False  # recompute every leave-one-out median from scratch
    workers: int = 1
    gm_tol: float = 1e-8
    gm_max_iter: int = 500

    def validate(self, m: int) -> None:
        if not self.eps_stop > 0:
            raise MedixError("eps_stop must be positive")
        if self.k < 1 or self.T < 1:
            raise MedixError("k and T must be at least 1")
        if self.stop_rule not in STOP_RULES:
            raise MedixError(f"stop_rule must be one of {STOP_RULES}")
        if self.aggregator not in AGGREGATORS:
            raise MedixError(f"aggregator must be one of {AGGREGATORS}")
        if self.workers < 1:
            raise MedixError("workers must be at least 1")
        if m <= self.k:
            raise MedixError("wild set smaller than removal batch")

    @classmethod
    def for_size(cls, m: int, **kw) -> "FilterConfig":
        """Harness default: ``k = max(1, m // 20)``."""
        kw.setdefault("k", max(1, m // 20))
        return cls(**kw)


@dataclass
class TraceRecord:
    iter: int
    d_t: float
    delta_max: float
    removed_ids: list[int]


@dataclass
class FilterResult:
    outlier_ids: np.ndarray
    survivor_ids: np.ndarray
    trace: list[TraceRecord]
    stop_reason: str  # converged | max_iter | exhausted
    rejected_ids: list[int] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.trace)


class _Scorer:
    """Aggregate and leave-one-out aggregates of the live rows."""

    def __init__(self, G: np.ndarray, ref: np.ndarray, cfg: FilterConfig):
        self.G = G
        self.ref = ref
        self.cfg = cfg
        self.alive = np.ones(len(G), dtype=bool)
        self.index = build_column_index(G) if cfg.aggregator == "ewm" and not cfg.naive else None

    def live(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def distance(self) -> float:
        S = self.G[self.alive]
        if self.cfg.aggregator == "ewm":
            return l2_distance(element_wise_median(S), self.ref)
        gm = geometric_median(S, tol=self.cfg.gm_tol, max_iter=self.cfg.gm_max_iter)
        return l2_distance(gm.point, self.ref)

    def _loo_block(self, rows: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        if cfg.aggregator == "gm":
            live = self.live()
            local = np.searchsorted(live, rows)
            Z = loo_geometric_medians(self.G[live], local, tol=cfg.gm_tol, max_iter=cfg.gm_max_iter)
        elif cfg.naive:
            Z = np.empty((len(rows), self.G.shape[1]))
            for j, i in enumerate(rows):
                keep = self.alive.copy()
                keep[i] = False
                Z[j] = element_wise_median(self.G[keep])
        else:
            Z = loo_medians(self.index, rows)
        return row_distances(Z, self.ref)

    def loo_distances(self, rows: np.ndarray) -> np.ndarray:
        w = self.cfg.workers
        # the geometric-median path is batched internally; splitting it would
        # change the batch shapes and hence the floating-point rounding
        if w == 1 or len(rows) < 2 * w or self.cfg.aggregator == "gm":
            return self._loo_block(rows)
        chunks = np.array_split(rows, w)
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(self._loo_block, chunks))
        return np.concatenate(parts)

    def set_alive(self, rows: np.ndarray, flag: bool) -> None:
        self.alive[rows] = flag
        if self.index is not None:
            if flag:  # rollback: rebuild from the survivors
                self.index = build_column_index(self.G)
                self.index.remove(np.flatnonzero(~self.alive))
            else:
                self.index.remove(rows)


def _select(delta: np.ndarray, k: int) -> np.ndarray:
    # largest first; equal scores keep ascending row order
    return np.argsort(-delta, kind="stable")[:k]


def medix_filter(wild: WildSet | np.ndarray, ref_grad, cfg: FilterConfig) -> FilterResult:
    """Run the greedy filter; ids in the result are row positions of ``wild``."""
    G = wild.gradients if isinstance(wild, WildSet) else wild
    if G is None:
        raise MedixError("wild set has no gradients")
    G = as_gradient_matrix(G)
    ref = np.asarray(ref_grad, dtype=np.float64).ravel()
    if ref.shape[0] != G.shape[1]:
        raise MedixError(f"gradient dimension {G.shape[1]} does not match reference length {ref.shape[0]}")
    m = G.shape[0]
    cfg.validate(m)

    sc = _Scorer(G, ref, cfg)
    trace: list[TraceRecord] = []
    outliers: list[int] = []
    rejected: list[int] = []
    pending: np.ndarray | None = None
    d_prev = None
    reason = "max_iter"
    t = 0
    while True:
        d_t = sc.distance()
        if pending is not None:
            if d_prev - d_t <= cfg.eps_stop:
                sc.set_alive(pending, True)
                rejected = pending.tolist()
                trace[-1].removed_ids = []
                reason = "converged"
                break
            outliers.extend(pending.tolist())
            pending = None
        if t >= cfg.T:
            break
        live = sc.live()
        if len(live) <= cfg.k:
            trace.append(TraceRecord(t, d_t, float("nan"), []))
            reason = "exhausted"
            break
        delta = d_t - sc.loo_distances(live)
        delta_max = float(delta.max())
        if cfg.stop_rule == "delta" and delta_max <= cfg.eps_stop:
            trace.append(TraceRecord(t, d_t, delta_max, []))
            reason = "converged"
            break
        picked = live[_select(delta, cfg.k)]
        trace.append(TraceRecord(t, d_t, delta_max, picked.tolist()))
        sc.set_alive(picked, False)
        if cfg.stop_rule == "drop":
            pending, d_prev = picked, d_t
        else:
            outliers.extend(picked.tolist())
        t += 1
        if cfg.stop_rule == "delta" and t >= cfg.T:
            break

    out = np.array(sorted(outliers), dtype=np.int64)
    surv = np.flatnonzero(sc.alive).astype(np.int64)
    return FilterResult(out, surv, trace, reason, rejected)


def deviation_sweep(ind_pool, ood_pool, ref_grad, steps) -> list[tuple[int, float]]:
    """Distance of the EWM of (InD pool + first ``n`` OOD rows) to the reference."""
    G_in = as_gradient_matrix(ind_pool.gradients if isinstance(ind_pool, WildSet) else ind_pool)
    G_out = as_gradient_matrix(
        ood_pool.gradients if isinstance(ood_pool, WildSet) else ood_pool, allow_empty=True
    )
    ref = np.asarray(ref_grad, dtype=np.float64)
    steps = [int(s) for s in steps]
    if any(b < a for a, b in zip(steps, steps[1:])):
        raise MedixError("steps must be non-decreasing")
    if steps and (steps[0] < 0 or steps[-1] > len(G_out)):
        raise MedixError(f"step {steps[-1]} exceeds OOD pool size {len(G_out)}")
    series = []
    for n in steps:
        S = np.vstack([G_in, G_out[:n]]) if n else G_in
        series.append((n, l2_distance(ref, element_wise_median(S))))
    return series


def err_rates(result: FilterResult, wild: WildSet) -> dict[str, float | None]:
    """Fractions of InD flagged and OOD kept; ``None`` when a class is absent."""
    origin = np.asarray(wild.origin)
    m_in = int(np.sum(origin == IND))
    m_out = int(np.sum(origin == OOD))
    flagged_in = int(np.sum(origin[result.outlier_ids] == IND))
    kept_out = int(np.sum(origin[result.survivor_ids] == OOD))
    return {
        "err_in": flagged_in / m_in if m_in else None,
        "err_out": kept_out / m_out if m_out else None,
    }


def ood_recall(result: FilterResult, wild: WildSet) -> float | None:
    e = err_rates(result, wild)["err_out"]
    return None if e is None else 1.0 - e


# --- serialization -----------------------------------------------------------


def write_result(json_path, trace_path, result: FilterResult, cfg: FilterConfig | None = None) -> None:
    doc = {
        "outlier_ids": result.outlier_ids.tolist(),
        "survivor_ids": result.survivor_ids.tolist(),
        "stop_reason": result.stop_reason,
        "rejected_ids": result.rejected_ids,
    }
    if cfg is not None:
        doc["config"] = asdict(cfg)
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(trace_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "d_t", "delta_max", "removed_ids"])
        for r in result.trace:
            w.writerow([r.iter, repr(r.d_t), repr(r.delta_max), " ".join(map(str, r.removed_ids))])


def read_result(json_path) -> dict:
    with open(json_path) as fh:
        return json.load(fh)
