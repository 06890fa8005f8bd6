"""Small Gauss-Legendre quadrature helpers.

The transition-band integrals of the smoothing profile are evaluated either
adaptively (scalar arguments, bisection until the panel estimate stabilises)
or with a fixed high-order rule broadcast over arrays.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=16)
def gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [-1, 1], cached per order."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def fixed_gl(f, a: float, b: float, order: int = 32) -> float:
    x, w = gl_nodes(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.sum(w * f(mid + half * x)))


def adaptive_gl(f, a: float, b: float, tol: float = 1e-12, _depth: int = 0) -> float:
    """Adaptive Gauss-Legendre integral of ``f`` over [a, b].

    Bisects panels until the 10-point estimate agrees with the sum of the
    two half-panel estimates to within the (per-panel) tolerance.
    """
    if b <= a:
        return 0.0
    coarse = fixed_gl(f, a, b, order=10)
    mid = 0.5 * (a + b)
    fine = fixed_gl(f, a, mid, order=10) + fixed_gl(f, mid, b, order=10)
    if abs(fine - coarse) <= tol or _depth >= 48:
        return fine
    return adaptive_gl(f, a, mid, 0.5 * tol, _depth + 1) + adaptive_gl(
        f, mid, b, 0.5 * tol, _depth + 1
    )


def fixed_gl_varupper(f, a: float, b: np.ndarray, order: int = 96) -> np.ndarray:
    """Vectorised ``\\int_a^{b_i} f`` for an array of upper limits.

    ``f`` must accept arrays. Exact panel mapping per upper limit; intended
    for smooth integrands such as the mollifier profile.
    """
    b = np.asarray(b, dtype=float)
    x, w = gl_nodes(order)
    half = 0.5 * (b - a)  # shape of b
    mid = 0.5 * (b + a)
    pts = mid[..., None] + half[..., None] * x  # (..., order)
    return half * np.sum(w * f(pts), axis=-1)
