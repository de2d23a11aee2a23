"""Exponentially-weighted streaming sufficient statistics for linear models.

A stream of pairs ``(x_t, y_t)`` is summarized by unnormalized moments under
geometric forgetting weights ``w_i = r**(t - i)``:

* ``gram``  : A_t = sum_i w_i x_i x_i^T   (uncentered weighted Gram)
* ``cross`` : b_t = sum_i w_i y_i x_i
* ``omega`` : sum_i w_i, the total weight (equals t when r == 1)
* ``mean``  : normalized running mean of x, kept for diagnostics only

Moments are deliberately left unnormalized (no division by omega) so that
``max_j |cross_j|`` is exactly the smallest penalty with an all-zero lasso
solution.
"""

from __future__ import annotations

import numpy as np

__all__ = ["WeightedMoments"]


class WeightedMoments:
    """Running weighted moments of a (x, y) stream with forgetting factor r.

    Single-writer: an instance may be handed between threads but must not be
    mutated concurrently.
    """

    def __init__(self, p: int, r: float):
        if p < 1:
            raise ValueError(f"dimension p must be >= 1, got {p}")
        if not (0.0 < r <= 1.0):
            raise ValueError(f"forgetting factor r must be in (0, 1], got {r}")
        self.p = int(p)
        self.r = float(r)
        self.t = 0
        self.omega = 0.0
        self.mean = np.zeros(self.p)
        self.gram = np.zeros((self.p, self.p))
        self.cross = np.zeros(self.p)

    def update(self, x, y: float) -> None:
        """Absorb one observation: age all moments by r, then add (x, y)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.p},)")
        y = float(y)
        if not (np.all(np.isfinite(x)) and np.isfinite(y)):
            raise ValueError("non-finite value in observation")

        self.omega = self.r * self.omega + 1.0
        self.mean += (x - self.mean) / self.omega
        self.gram *= self.r
        self.gram += np.outer(x, x)
        self.cross = self.r * self.cross + y * x
        self.t += 1

    def effective_weight(self, i: int) -> float:
        """Weight r**(t - i) currently applied to the i-th observation (1-based)."""
        if not (1 <= i <= self.t):
            raise IndexError(f"observation index {i} out of range [1, {self.t}]")
        return self.r ** (self.t - i)

    def copy(self) -> "WeightedMoments":
        out = WeightedMoments(self.p, self.r)
        out.t = self.t
        out.omega = self.omega
        out.mean = self.mean.copy()
        out.gram = self.gram.copy()
        out.cross = self.cross.copy()
        return out

    def __repr__(self) -> str:
        return f"WeightedMoments(p={self.p}, r={self.r}, t={self.t}, omega={self.omega:.6g})"
