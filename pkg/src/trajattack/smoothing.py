"""Linear trajectory smoothing.

A smoother convolves interior points with a short odd-length kernel and
leaves the first and last half-window of points untouched, so a smoothed
history still starts and ends exactly where the raw one does.  Because the
operation is linear it is expressed as a matrix, which lets predictors
differentiate through input smoothing exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_KERNEL = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


@dataclass(frozen=True)
class SmootherSpec:
    """Odd-length moving-average kernel summing to 1."""

    kernel: tuple[float, ...] = DEFAULT_KERNEL

    def __post_init__(self):
        k = tuple(float(w) for w in self.kernel)
        if len(k) < 3 or len(k) % 2 == 0:
            raise ValueError("kernel length must be odd and >= 3")
        if abs(sum(k) - 1.0) > 1e-9:
            raise ValueError("kernel must sum to 1")
        object.__setattr__(self, "kernel", k)

    @property
    def half(self) -> int:
        return len(self.kernel) // 2

    def matrix(self, n: int) -> np.ndarray:
        """The (n, n) linear map this smoother applies to n points.

        Built from the same update used by ``apply`` (center point plus
        weighted differences), so matrix and apply agree bit for bit on
        stationary inputs.
        """
        m = np.eye(n)
        h = self.half
        for i in range(h, n - h):
            for j, w in enumerate(self.kernel):
                col = i - h + j
                if col == i:
                    continue
                m[i, col] += w
                m[i, i] -= w
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Smooth an (n, d) array of points.  Rows within half a window of
        either end pass through unchanged; a stationary trajectory is
        returned exactly."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be 2-D")
        n = pts.shape[0]
        h = self.half
        if n < 2 * h + 1:
            return pts.copy()
        out = pts.copy()
        center = pts[h : n - h]
        acc = np.zeros_like(center)
        for j, w in enumerate(self.kernel):
            if j == h:
                continue
            acc = acc + w * (pts[j : n - 2 * h + j] - center)
        out[h : n - h] = center + acc
        return out
