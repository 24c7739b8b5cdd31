"""Finite-difference derivatives on uniform grids.

Stencil weights come from Fornberg's recursion, so arbitrary derivative and
accuracy orders are available; interior points use centered stencils and the
edges fall back to one-sided stencils of the same formal order.
"""

from __future__ import annotations

import numpy as np

from .errors import ResolutionError

__all__ = ["fd_weights", "derivative"]


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights w with sum(w * f(x)) ~ f^(m)(x0), Fornberg's algorithm."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if m >= n:
        raise ResolutionError(f"need more than {m} nodes for derivative order {m}")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def derivative(f: np.ndarray, h: float, m: int, acc: int = 4) -> np.ndarray:
    """m-th derivative of samples f on a uniform grid of spacing h.

    Centered stencils of formal order `acc` in the interior, one-sided
    stencils of the same order at the boundaries.
    """
    f = np.asarray(f, dtype=float)
    n = len(f)
    if m == 0:
        return f.copy()
    half = (m + acc - 1) // 2 + (1 if (m % 2 == 0) else 0)
    half = max(half, (m + 1) // 2 + acc // 2)
    width = 2 * half + 1
    n_side = m + acc  # one-sided stencil length
    if n < max(width, n_side):
        raise ResolutionError(
            f"grid of {n} points too short for order-{m} derivative at accuracy {acc}")

    out = np.empty(n)
    offsets = np.arange(-half, half + 1, dtype=float)
    w_center = fd_weights(offsets * h, 0.0, m)
    core = np.convolve(f, w_center[::-1], mode="valid")
    out[half:n - half] = core

    side = np.arange(n_side, dtype=float)
    for i in range(half):
        w = fd_weights(side * h, i * h, m)
        out[i] = w @ f[:n_side]
        w = fd_weights(-side[::-1] * h, -i * h, m)
        out[n - 1 - i] = w @ f[n - n_side:]
    return out
