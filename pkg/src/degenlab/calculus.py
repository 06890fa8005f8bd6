"""Auxiliary scalar machinery for the degenerate-parabolic toolbox.

Holds the gradient truncation G_delta, the sup-target H_lambda, the weight
Phi_{gamma,a}, the exponent bookkeeping (effective dimension, iteration
exponents, Moser sequences), the algebraic product bounds used to close the
iteration, Luxemburg norms of Zygmund type, and piecewise-cubic cutoff
builders for nested parabolic cylinders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchMismatchError, DomainError, PreconditionError

# ---------------------------------------------------------------------------
# pointwise auxiliary functions


def G_delta(delta: float, xi: np.ndarray) -> np.ndarray:
    """Truncation (|xi|-1-delta)_+ xi/|xi| of a gradient matrix; 0 at 0."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    xi = np.asarray(xi, dtype=float)
    s = float(np.sqrt(np.sum(xi**2)))
    if s == 0.0:
        return np.zeros_like(xi)
    return max(s - 1.0 - delta, 0.0) / s * xi


def g_delta_of_gradient(delta: float, grad: np.ndarray) -> np.ndarray:
    """Vectorised G_delta over a gradient field of shape (N, n, ...)."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    grad = np.asarray(grad, dtype=float)
    s = np.sqrt(np.sum(grad**2, axis=(0, 1)))
    scale = np.zeros_like(s)
    np.divide(np.maximum(s - 1.0 - delta, 0.0), s, out=scale, where=s > 0)
    return scale * grad


def H_lambda(lam: float, xi: np.ndarray) -> float:
    """max{1+lambda, |xi|}, the quantity whose essential sup gets bounded."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    xi = np.asarray(xi, dtype=float)
    return max(1.0 + lam, float(np.sqrt(np.sum(xi**2))))


def h_lambda_of_norm(lam: float, s: np.ndarray) -> np.ndarray:
    if lam <= 0:
        raise DomainError("lambda must be positive")
    return np.maximum(1.0 + lam, np.asarray(s, dtype=float))


def Phi(gamma: float, a: float, w):
    """Weight w^2 (a+w)^{gamma-2} and its derivative.

    Checks the bounds Phi' <= 2(gamma+1) w (a+w)^{gamma-2} and
    w Phi' <= 2(gamma+1) Phi before returning.
    """
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    if a <= 0:
        raise DomainError("a must be positive")
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise DomainError("w must be nonnegative")
    base = (a + w) ** (gamma - 2.0)
    value = w**2 * base
    deriv = 2.0 * w * base + (gamma - 2.0) * w**2 * (a + w) ** (gamma - 3.0)
    cap = 2.0 * (gamma + 1.0) * w * base
    assert np.all(deriv <= cap * (1 + 1e-12) + 1e-300)
    assert np.all(w * deriv <= 2.0 * (gamma + 1.0) * value * (1 + 1e-12) + 1e-300)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


# ---------------------------------------------------------------------------
# exponent bookkeeping


def default_beta(n: int, p: float) -> float:
    """Default exponent correction for the plane: half the admissible sup."""
    if n != 2 or p >= 2:
        return 1.0
    return min(1.0, 2.0 * (p - 1.0) / (2.0 - p))


@dataclass(frozen=True)
class ExponentTable:
    """All derived exponents for given (n, p, beta)."""

    n: int
    p: float
    beta: float
    n_hat: float
    frak_p: float
    kappa: float
    phi: float
    nu: float
    regime: str  # 'subcritical' | 'subquadratic-supercritical' | 'superquadratic'

    @property
    def supercritical(self) -> bool:
        return self.regime != "subcritical"


def exponent_table(n: int, p: float, beta: float | None = None) -> ExponentTable:
    """Populate the exponent zoo.

    n_hat = n for n > 2 and 2+beta for n = 2; the plane correction beta must
    satisfy 0 < beta < 4(p-1)/(2-p) when 1 < p < 2, which guarantees
    p > 2 n_hat/(n_hat+2) for every p > 1.
    """
    if n < 2:
        raise PreconditionError("the analysis needs n >= 2")
    if p <= 1:
        raise PreconditionError("p must exceed 1")
    if beta is None:
        beta = default_beta(n, p)
    if n == 2 and 1 < p < 2:
        cap = 4.0 * (p - 1.0) / (2.0 - p)
        if not 0 < beta < cap:
            raise PreconditionError(f"beta={beta} outside (0, {cap:g})")
    n_hat = float(n) if n > 2 else 2.0 + beta

    crit = 2.0 * n / (n + 2.0)
    if p <= crit:
        regime = "subcritical"
        frak_p = p
    elif p < 2:
        regime = "subquadratic-supercritical"
        frak_p = 2.0
    else:
        regime = "superquadratic"
        frak_p = p

    if p >= 2:
        kappa = 2.0
        phi = 2.0
    else:
        kappa = (p * (n_hat + 2.0) - 2.0 * n_hat) / 2.0
        phi = 2.0 - n_hat * (2.0 - p) / 2.0

    nu = n_hat / (2.0 * (n_hat + 2.0))
    return ExponentTable(
        n=n, p=p, beta=beta, n_hat=n_hat, frak_p=frak_p, kappa=kappa, phi=phi,
        nu=nu, regime=regime,
    )


@dataclass(frozen=True)
class MoserSequence:
    """Iteration exponents gamma_k with their integrability targets."""

    branch: str  # 'supercritical' | 'subcritical'
    gammas: np.ndarray
    targets: np.ndarray  # gamma_k + frak_p (supercritical) or gamma_k + p
    table: ExponentTable


def moser_closed_form(table: ExponentTable, k: np.ndarray) -> np.ndarray:
    """Closed form of gamma_k in the regime of ``table``."""
    k = np.asarray(k, dtype=float)
    if table.regime == "subcritical":
        return table.p * ((1.0 + 2.0 / table.n) ** k - 1.0)
    growth = (1.0 + 2.0 / table.n_hat) ** k - 1.0
    if table.p >= 2:
        return 2.0 * growth
    return (2.0 - table.n_hat * (2.0 - table.p) / 2.0) * growth


def moser_sequence(table: ExponentTable, k_max: int) -> MoserSequence:
    """Recursively build gamma_0..gamma_{k_max} for the regime of ``table``."""
    if k_max < 1:
        raise PreconditionError("k_max must be >= 1")
    p = table.p
    gam = np.zeros(k_max + 1)
    if table.supercritical:
        if not p > 2.0 * table.n_hat / (table.n_hat + 2.0):
            raise BranchMismatchError("supercritical recursion needs p > 2n^/(n^+2)")
        nh = table.n_hat
        inc = 4.0 / nh if p >= 2 else 4.0 / nh - 2.0 + p
        for k in range(1, k_max + 1):
            gam[k] = (1.0 + 2.0 / nh) * gam[k - 1] + inc
        targets = gam + table.frak_p
        branch = "supercritical"
    else:
        n = table.n
        for k in range(1, k_max + 1):
            gam[k] = (1.0 + 2.0 / n) * gam[k - 1] + 2.0 * p / n
        targets = gam + p
        branch = "subcritical"
    return MoserSequence(branch=branch, gammas=gam, targets=targets, table=table)


def moser_recursion_identity_gap(seq: MoserSequence) -> np.ndarray:
    """gamma_k + p + 2(gamma_k+2)/n^ - (gamma_{k+1} + frak_p).

    Vanishes identically on the supercritical branch; strictly positive on
    the subcritical one (where the target exponent is gamma_k + p).
    """
    t = seq.table
    g = seq.gammas
    nh = t.n_hat if seq.branch == "supercritical" else float(t.n)
    fp = t.frak_p if seq.branch == "supercritical" else t.p
    return g[:-1] + t.p + 2.0 * (g[:-1] + 2.0) / nh - (g[1:] + fp)


# ---------------------------------------------------------------------------
# iteration product bounds


def product_bounds(A: float, kap: float, alpha: float, C: float, c: float, i: int):
    """Evaluate the two geometric products against their closed-form caps.

    With beta_j = C kap^j (the minimal admissible sequence),

        prod1 = prod_{j=0}^i A^{kap^{i-(1-alpha)j} / beta_{i+1}}
              <= A^{1/(C kap (1-kap^{alpha-1}))} = bound1,
        prod2 = prod_{j=0}^i A^{j c kap^{i+1-j} / beta_{i+1}}
              <= A^{c kap / (C (1-kap)^2)} = bound2.

    Returns (prod1, bound1, prod2, bound2); raises if either cap fails.
    """
    if not A > 1:
        raise DomainError("A must exceed 1")
    if not kap > 1:
        raise DomainError("kappa must exceed 1")
    if not 0 <= alpha < 1:
        raise DomainError("alpha must lie in [0, 1)")
    if C <= 0 or c <= 0:
        raise DomainError("C and c must be positive")
    if i < 0:
        raise DomainError("i must be nonnegative")

    j = np.arange(i + 1, dtype=float)
    lnA = np.log(A)
    # exponents collapse to geometric sums; compare in log space (the caps
    # explode as kappa -> 1 while the products stay finite)
    e1 = float(np.sum(kap ** (-1.0 - (1.0 - alpha) * j))) / C
    e2 = float(np.sum(c * j * kap ** (-j))) / C
    b1 = 1.0 / (C * kap * (1.0 - kap ** (alpha - 1.0)))
    b2 = c * kap / (C * (1.0 - kap) ** 2)
    if e1 > b1 * (1 + 1e-12):
        raise AssertionError(f"first product bound failed: exponents {e1} > {b1}")
    if e2 > b2 * (1 + 1e-12):
        raise AssertionError(f"second product bound failed: exponents {e2} > {b2}")
    with np.errstate(over="ignore"):
        return (
            float(np.exp(lnA * e1)),
            float(np.exp(lnA * b1)),
            float(np.exp(lnA * e2)),
            float(np.exp(lnA * b2)),
        )


# ---------------------------------------------------------------------------
# Luxemburg norm of the Zygmund class


def young_zygmund(s: np.ndarray, q: float, alpha: float) -> np.ndarray:
    """Young function s^q log^alpha(e + s)."""
    s = np.asarray(s, dtype=float)
    return s**q * np.log(np.e + s) ** alpha


def luxemburg_norm(values, q: float, alpha: float, weights=None) -> float:
    """inf{lambda > 0 : sum_i w_i Psi(|v_i|/lambda) <= 1} by bisection.

    ``weights`` are the measures of the sample cells; they default to a
    uniform probability measure (a unit-measure set). Relative tolerance
    1e-8; returns 0 for the a.e.-zero function.
    """
    if not (q > 1 or (q == 1 and alpha >= 0)):
        raise DomainError("need q > 1, or q = 1 with alpha >= 0")
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    if not np.all(np.isfinite(v)):
        raise DomainError("values must be finite")
    if weights is None:
        w = np.full(v.size, 1.0 / v.size)
    else:
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape).ravel()
    vmax = float(np.max(v, initial=0.0))
    if vmax == 0.0:
        return 0.0

    def integral(lam):
        return float(np.sum(w * young_zygmund(v / lam, q, alpha)))

    lo, hi = vmax * 1e-3, vmax * 1e3
    for _ in range(200):  # geometric bracket expansion
        if integral(lo) >= 1.0:
            break
        lo *= 0.125
    for _ in range(200):
        if integral(hi) <= 1.0:
            break
        hi *= 8.0
    while hi - lo > 1e-8 * hi:
        mid = 0.5 * (lo + hi)
        if integral(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# cutoff builders


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """C^1 ramp 3x^2 - 2x^3 clipped to [0, 1]; max slope 3/2 at x = 1/2."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def cutoff_pair(r: float, s: float, k: int, t1: float = 0.0):
    """Cutoffs (eta_k, omega_k) for the nested cylinders Q_{r_k}.

    r_k = s r + (1-s) r / 2^k. eta_k is radial: eta_k(rho) = 1 for
    rho <= r_{k+1}, 0 for rho >= r_k, with |eta_k'| <= 2^{k+2}/((1-s) r).
    omega_k(t) vanishes at t1 - r_k^2, equals 1 on (t1 - r_{k+1}^2, t1) and
    has 0 <= d/dt omega_k <= 2^{2k+2}/((1-s)^2 r^2). Both are piecewise
    cubic; nothing downstream uses more than C^1 smoothness.
    """
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    if r <= 0:
        raise DomainError("r must be positive")
    if k < 0:
        raise DomainError("k must be nonnegative")
    r_k = s * r + (1.0 - s) * r / 2.0**k
    r_k1 = s * r + (1.0 - s) * r / 2.0 ** (k + 1)

    def eta(rho):
        rho = np.asarray(rho, dtype=float)
        out = _smoothstep((r_k - rho) / (r_k - r_k1))
        return out if out.ndim else float(out)

    a = t1 - r_k**2
    b = t1 - r_k1**2

    def omega(t):
        t = np.asarray(t, dtype=float)
        out = _smoothstep((t - a) / (b - a))
        return out if out.ndim else float(out)

    return eta, omega, r_k
