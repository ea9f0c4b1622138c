"""Counter-based random source used by every generator in the package.

The stream is numpy's Philox-4x64-10 keyed by the seed.  Raw 64-bit words are
turned into doubles and normals by fixed formulas implemented here (not by
numpy's Generator methods), so the derived values only depend on the Philox
word stream, which is specified by the algorithm itself.
"""

from __future__ import annotations

import numpy as np

from .errors import MedixError

ALGORITHM = "philox4x64-10/boxmuller-v1"

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class CounterRNG:
    """Deterministic stream: ``CounterRNG(seed)`` always yields the same draws."""

    algorithm = ALGORITHM

    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0:
            raise MedixError("seed must be non-negative")
        self.seed = seed
        self._bits = np.random.Philox(key=seed)

    def spawn(self, offset: int) -> "CounterRNG":
        """Independent stream for a sub-task (keyed by seed and offset)."""
        return CounterRNG((self.seed * 1_000_003 + int(offset) + 1) % (1 << 63))

    def _raw(self, n: int) -> np.ndarray:
        return np.asarray(self._bits.random_raw(n), dtype=np.uint64)

    def uniform(self, size) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return u.reshape(shape)

    def normal(self, size, loc=0.0, scale=1.0) -> np.ndarray:
        """Gaussian draws by the Box-Muller transform (both outputs used)."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        half = (n + 1) // 2
        u1 = self.uniform(half)
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 lies in (0, 1]
        z = np.empty(2 * half)
        z[0::2] = r * np.cos(_TWO_PI * u2)
        z[1::2] = r * np.sin(_TWO_PI * u2)
        return loc + scale * z[:n].reshape(shape)

    def standard_t(self, nu: int, size) -> np.ndarray:
        """Student-t with integer ``nu`` degrees of freedom: z / sqrt(chi2 / nu)."""
        nu = int(nu)
        if nu < 1:
            raise MedixError("degrees of freedom must be a positive integer")
        shape = (size,) if np.isscalar(size) else tuple(size)
        z = self.normal(shape)
        chi2 = np.sum(self.normal(shape + (nu,)) ** 2, axis=-1)
        return z / np.sqrt(chi2 / nu)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, in random order."""
        if k > n:
            raise MedixError(f"cannot draw {k} items from {n}")
        return self.permutation(n)[:k]

    def unit_vector(self, d: int) -> np.ndarray:
        v = self.normal(d)
        return v / np.linalg.norm(v)
