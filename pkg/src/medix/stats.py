"""Robust vector statistics over gradient matrices.

A gradient matrix is a plain ``float64`` array of shape ``(m, d)``: one row
per sample, one column per gradient coordinate.  The element-wise median
(EWM) takes the median of every column; even counts average the two middle
order statistics.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MedixError

GRADIENT_MAGIC = b"MDXG"


def as_gradient_matrix(G, *, allow_empty: bool = False) -> np.ndarray:
    """Validate ``G`` and return it as a 2-D float64 array."""
    arr = np.asarray(G, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise MedixError(f"gradient matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        if allow_empty:
            return arr
        raise MedixError("empty sample set")
    if not np.all(np.isfinite(arr)):
        raise MedixError("non-finite gradient")
    return arr


def element_wise_median(G) -> np.ndarray:
    """Column-wise median of ``G``; mean of the two middle values when m is even."""
    G = as_gradient_matrix(G)
    return np.median(G, axis=0)


def l2_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MedixError(f"length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.sum(diff * diff)))


def row_distances(rows: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Euclidean distance of every row of ``rows`` to ``ref``.

    Uses the same reduction as :func:`l2_distance` so that a single row gives a
    bit-identical result either way.
    """
    diff = rows - ref
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass
class ColumnOrderIndex:
    """Per-column sort order of the live rows of a gradient matrix.

    ``order[:, j]`` lists live row ids so that column ``j`` is ascending (ties
    by row id); ``rank[i, j]`` is the position of row ``i`` in that order, or
    -1 once the row has been removed.  ``values`` caches the sorted columns.
    """

    order: np.ndarray
    rank: np.ndarray
    values: np.ndarray
    alive: np.ndarray = field(repr=False)

    @property
    def n_live(self) -> int:
        return self.order.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rank.shape[0]

    def live_rows(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def median(self) -> np.ndarray:
        """EWM of the live rows, read off the sorted columns."""
        n = self.n_live
        if n == 0:
            raise MedixError("empty sample set")
        if n % 2:
            return self.values[n // 2].copy()
        return (self.values[n // 2 - 1] + self.values[n // 2]) / 2

    def remove(self, rows) -> None:
        """Drop ``rows`` from the index, keeping the surviving order stable."""
        rows = np.asarray(rows, dtype=np.intp).ravel()
        if rows.size == 0:
            return
        if np.any(rows < 0) or np.any(rows >= self.n_rows) or not np.all(self.alive[rows]):
            raise MedixError("row id is dead or out of range")
        self.alive[rows] = False
        keep = self.alive[self.order]
        d = self.order.shape[1]
        n_new = self.n_live - len(np.unique(rows))
        # boolean masking walks column-major after the transpose, preserving order
        self.order = self.order.T[keep.T].reshape(d, n_new).T.copy()
        self.values = self.values.T[keep.T].reshape(d, n_new).T.copy()
        self.rank.fill(-1)
        np.put_along_axis(
            self.rank, self.order, np.broadcast_to(np.arange(n_new)[:, None], self.order.shape), axis=0
        )


def build_column_index(G) -> ColumnOrderIndex:
    G = as_gradient_matrix(G)
    m, d = G.shape
    order = np.argsort(G, axis=0, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(m)[:, None], (m, d)), axis=0)
    values = np.take_along_axis(G, order, axis=0)
    return ColumnOrderIndex(order=order, rank=rank, values=values, alive=np.ones(m, dtype=bool))


def _loo_from_ranks(values: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    # values: (n, d) sorted columns; ranks: (r, d) positions of the dropped rows
    n = values.shape[0]
    n1 = n - 1
    cols = np.arange(values.shape[1])

    def at(pos: int) -> np.ndarray:
        # value at position ``pos`` once the dropped entry is skipped
        idx = pos + (ranks <= pos)
        return values[idx, cols]

    if n1 % 2:
        return at(n1 // 2)
    return (at(n1 // 2 - 1) + at(n1 // 2)) / 2


def loo_median(index: ColumnOrderIndex, G, i: int) -> np.ndarray:
    """EWM of the live rows with row ``i`` left out, in O(d)."""
    if not 0 <= i < index.n_rows or not index.alive[i]:
        raise MedixError(f"row {i} is dead or out of range")
    if index.n_live < 2:
        raise MedixError("empty sample set")
    return _loo_from_ranks(index.values, index.rank[i][None, :])[0]


def loo_medians(index: ColumnOrderIndex, rows=None) -> np.ndarray:
    """Leave-one-out EWMs for each of ``rows`` (default: all live rows)."""
    if rows is None:
        rows = index.live_rows()
    rows = np.asarray(rows, dtype=np.intp)
    if index.n_live < 2:
        raise MedixError("empty sample set")
    if rows.size and (np.any(rows < 0) or np.any(rows >= index.n_rows) or not np.all(index.alive[rows])):
        raise MedixError("row id is dead or out of range")
    return _loo_from_ranks(index.values, index.rank[rows])


@dataclass
class GeometricMedian:
    point: np.ndarray
    converged: bool
    n_iter: int
    objective: list[float]


def _sum_of_distances(G: np.ndarray, z: np.ndarray) -> float:
    return float(np.sum(row_distances(G, z)))


def geometric_median(G, tol: float = 1e-10, max_iter: int = 1000, init=None) -> GeometricMedian:
    """Weiszfeld iteration for the point minimising the sum of Euclidean distances.

    When the iterate lands on a data point (within 1e-12) it is nudged by
    1e-9 times the column ranges before the next step.
    """
    G = as_gradient_matrix(G)
    if tol <= 0:
        raise MedixError("tol must be positive")
    if G.shape[0] == 1:
        return GeometricMedian(G[0].copy(), True, 0, [0.0])
    nudge = 1e-9 * np.ptp(G, axis=0)
    z = G.mean(axis=0) if init is None else np.asarray(init, dtype=np.float64).copy()
    objective = [_sum_of_distances(G, z)]
    for it in range(1, max_iter + 1):
        dist = row_distances(G, z)
        vertex = G[int(np.argmin(dist))]
        dv = row_distances(G, vertex)
        if _vertex_is_optimal(G, vertex, dv, dv < 1e-12, strict=True):
            # the optimum sits on a data point, where plain Weiszfeld only creeps
            objective.append(_sum_of_distances(G, vertex))
            return GeometricMedian(vertex.copy(), True, it, objective)
        on = dist < 1e-12
        if np.any(on):
            if _vertex_is_optimal(G, z, dist, on) or not np.any(nudge):
                return GeometricMedian(z, True, it - 1, objective)
            z = z + nudge
            dist = row_distances(G, z)
        w = 1.0 / dist
        z_new = (w @ G) / w.sum()
        objective.append(_sum_of_distances(G, z_new))
        step = l2_distance(z_new, z)
        z = z_new
        if step < tol:
            return GeometricMedian(z, True, it, objective)
    return GeometricMedian(z, False, max_iter, objective)


def _vertex_is_optimal(G: np.ndarray, z: np.ndarray, dist: np.ndarray, on: np.ndarray,
                       strict: bool = False) -> bool:
    """Optimality test for an iterate sitting on ``c`` coincident data points.

    Such a point is a geometric median iff the summed unit pull of the
    remaining points has norm at most ``c``.  At equality the minimizer is
    not unique; ``strict`` rejects that case so shortcuts do not pick an
    arbitrary end of the minimizing set.
    """
    c = int(np.sum(on))
    off = ~on
    if not np.any(off):
        return True
    pull = np.sum((G[off] - z) / dist[off, None], axis=0)
    norm = float(np.sqrt(np.sum(pull * pull)))
    return norm < c if strict else norm <= c


def loo_geometric_medians(G, rows=None, tol: float = 1e-8, max_iter: int = 500, init=None) -> np.ndarray:
    """Geometric medians of ``G`` with each of ``rows`` left out, solved as one batch.

    All leave-one-out problems run Weiszfeld in lockstep from a shared start
    (the full-set geometric median unless ``init`` is given).
    """
    G = as_gradient_matrix(G)
    m, d = G.shape
    if m < 2:
        raise MedixError("empty sample set")
    rows = np.arange(m) if rows is None else np.asarray(rows, dtype=np.intp)
    if init is None:
        init = geometric_median(G, tol=tol, max_iter=max_iter).point
    Z = np.empty((len(rows), d))
    # Leave-one-out problems whose optimum is the data point nearest ``init``:
    # removing row i changes that vertex's multiplicity and pull by one term.
    init = np.asarray(init, dtype=np.float64)
    k = int(np.argmin(row_distances(G, init)))
    dk = row_distances(G, G[k])
    on = dk < 1e-12
    off = ~on
    pull = np.sum((G[off] - G[k]) / dk[off, None], axis=0)
    c = int(on.sum()) - on[rows].astype(int)
    pull_i = pull - np.where(on[rows], 0.0, 1.0)[:, None] * (G[rows] - G[k]) / np.where(on[rows], 1.0, dk[rows])[:, None]
    at_vertex = (c >= 1) & (np.sqrt(np.sum(pull_i * pull_i, axis=1)) < c)
    Z[at_vertex] = G[k]
    todo = np.flatnonzero(~at_vertex)
    step = max(1, int(4_000_000 // max(1, m * d)))
    for lo in range(0, len(todo), step):
        sel = todo[lo : lo + step]
        Z[sel] = _loo_gm_block(G, rows[sel], init, tol, max_iter)
    return Z


def _loo_gm_block(G: np.ndarray, rows: np.ndarray, init, tol: float, max_iter: int) -> np.ndarray:
    m, d = G.shape
    mask = np.ones((len(rows), m))
    mask[np.arange(len(rows)), rows] = 0.0
    nudge = 1e-9 * np.ptp(G, axis=0)
    Z = np.broadcast_to(np.asarray(init, dtype=np.float64), (len(rows), d)).copy()
    active = np.ones(len(rows), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        Za = Z[active]
        Ma = mask[active]
        diff = Za[:, None, :] - G[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        on = (dist < 1e-12) & (Ma > 0)
        hit = np.any(on, axis=1)
        if hit.any():
            idx = np.flatnonzero(active)
            done = np.zeros(len(Za), dtype=bool)
            for r in np.flatnonzero(hit):
                live = Ma[r] > 0
                done[r] = _vertex_is_optimal(G[live], Za[r], dist[r, live], on[r, live])
            if done.any():
                Z[idx[done]] = Za[done]
                active[idx[done]] = False
                keep = ~done
                Za, Ma, hit = Za[keep], Ma[keep], hit[keep]
                if not len(Za):
                    break
            Za[hit] += nudge
            diff = Za[:, None, :] - G[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, axis=2))
        W = Ma / np.maximum(dist, 1e-300)
        Z_new = (W @ G) / W.sum(axis=1, keepdims=True)
        step = np.sqrt(np.sum((Z_new - Za) ** 2, axis=1))
        Z[active] = Z_new
        idx = np.flatnonzero(active)
        active[idx[step < tol]] = False
    return Z


# --- serialization -----------------------------------------------------------


def write_gradients_csv(path, G) -> None:
    G = as_gradient_matrix(G)
    header = ",".join(f"g{j}" for j in range(G.shape[1]))
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in G:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_gradients_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or not all(h.startswith("g") for h in header):
            raise MedixError(f"{path}: expected header g0,g1,...")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    G = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return as_gradient_matrix(G)


def write_gradients_binary(path, G) -> None:
    G = as_gradient_matrix(G)
    m, d = G.shape
    with open(path, "wb") as fh:
        fh.write(GRADIENT_MAGIC)
        fh.write(struct.pack("<II", m, d))
        fh.write(np.ascontiguousarray(G, dtype="<f8").tobytes())


def read_gradients_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != GRADIENT_MAGIC:
        raise MedixError(f"{path}: bad magic, expected MDXG")
    m, d = struct.unpack("<II", data[4:12])
    body = data[12:]
    if len(body) != 8 * m * d:
        raise MedixError(f"{path}: expected {m}x{d} values, found {len(body) // 8}")
    return as_gradient_matrix(np.frombuffer(body, dtype="<f8").reshape(m, d).astype(np.float64))


def read_gradients(path) -> np.ndarray:
    """Read a gradient matrix, picking the format from the file's first bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == GRADIENT_MAGIC:
        return read_gradients_binary(path)
    return read_gradients_csv(path)


__all__ = [
    "ColumnOrderIndex",
    "GeometricMedian",
    "as_gradient_matrix",
    "build_column_index",
    "element_wise_median",
    "geometric_median",
    "l2_distance",
    "loo_geometric_medians",
    "loo_median",
    "loo_medians",
    "read_gradients",
    "read_gradients_binary",
    "read_gradients_csv",
    "row_distances",
    "write_gradients_binary",
    "write_gradients_csv",
]

