"""Structure function F, growth conditions and the degenerate vector field.

The flux is generated by a convex function F(x, t, s) that vanishes for
s in [0, 1], so the field

    A(x, t, xi) = dF/ds(x, t, |xi|) * xi / |xi|,   A(x, t, 0) = 0,

is identically zero on the unit ball of gradient space: any time-independent
1-Lipschitz function solves the homogeneous system. The model case is
F = (a(x,t)/p) * (s-1)_+^p.

Gradient matrices are plain ndarrays of shape (N, n); their norm is the
Euclidean (Frobenius) one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionError

Coefficient = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class StructureParams:
    """Constants (p, L, C1, K, delta, epsilon, N, n, beta) of the structure.

    beta only matters for n = 2, where the effective dimension is 2 + beta
    and, for 1 < p < 2, beta must lie in (0, 4(p-1)/(2-p)).
    """

    p: float
    L: float = 2.0
    C1: float = 2.0
    K: float = 1.0
    delta: float = 1.0
    epsilon: float = 0.1
    N: int = 1
    n: int = 2
    beta: Optional[float] = None

    def __post_init__(self):
        if not self.p > 1:
            raise PreconditionError(f"growth exponent must satisfy p > 1, got {self.p}")
        if self.beta is None:
            # half the admissible supremum 4(p-1)/(2-p) in the plane, else 1
            if self.n == 2 and 1 < self.p < 2:
                object.__setattr__(
                    self, "beta", min(1.0, 2.0 * (self.p - 1.0) / (2.0 - self.p))
                )
            else:
                object.__setattr__(self, "beta", 1.0)
        if self.L <= 0 or self.K < 0 or self.delta <= 0:
            raise PreconditionError("L, delta must be positive and K nonnegative")
        if not self.C1 > 1:
            raise PreconditionError(f"C1 must exceed 1, got {self.C1}")
        if self.N < 1 or self.n < 1:
            raise PreconditionError("dimensions N >= 1, n >= 1 required")
        if self.epsilon < 0:
            raise PreconditionError("epsilon must be nonnegative")
        if self.n == 2 and 1 < self.p < 2:
            cap = 4 * (self.p - 1) / (2 - self.p)
            if not 0 < self.beta < cap:
                raise PreconditionError(
                    f"beta={self.beta} outside (0, {cap:g}) required for n=2, p={self.p}"
                )

    @property
    def eps_upper(self) -> float:
        """min{1/2, (delta/4)^(p-1)}: the range where the delta-window lemmas hold."""
        return min(0.5, (self.delta / 4.0) ** (self.p - 1))

    def require_eps_in_window_range(self) -> None:
        """Flag epsilon values too large for the delta-window estimates.

        The monotonicity and truncation-comparison lemmas need
        epsilon < min{1/2, (delta/4)^(p-1)}; we refuse rather than widen.
        """
        if not 0 < self.epsilon < self.eps_upper:
            raise PreconditionError(
                f"epsilon={self.epsilon} outside (0, {self.eps_upper:g}) "
                f"= (0, min(1/2, (delta/4)^(p-1))) for delta={self.delta}, p={self.p}"
            )


@dataclass(frozen=True)
class StructureFunction:
    """Evaluator bundle for F and its s-derivatives.

    All callables take (x, t, s) with x of shape (n,) or (n, ...) broadcasting
    against s; they must accept array-valued s. d_ss may be infinite at s = 1
    for p < 2 (F is only C^2 away from 1).
    """

    value: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    d_s: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    d_ss: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    coefficient: Optional[Coefficient] = None


def prototype_F(params: StructureParams, a_val: float, s: float):
    """Model structure function (a/p)(s-1)_+^p with its s-derivatives.

    Returns (value, d_s, d_ss); d_ss is evaluated away from s = 1 only.
    """
    if s < 0:
        raise DomainError(f"s must be nonnegative, got {s}")
    if a_val <= 0:
        raise DomainError(f"coefficient must be positive, got {a_val}")
    p = params.p
    w = max(s - 1.0, 0.0)
    value = (a_val / p) * w**p
    d_s = a_val * w ** (p - 1.0) if w > 0 else 0.0
    if s > 1:
        d_ss = a_val * (p - 1.0) * w ** (p - 2.0)
    else:
        d_ss = 0.0
    return value, d_s, d_ss


def make_prototype(params: StructureParams, a=1.0) -> StructureFunction:
    """Build the prototype StructureFunction with coefficient ``a``.

    ``a`` is either a positive constant or a callable a(x, t) -> array with x
    of shape (n, ...).
    """
    p = params.p

    if callable(a):
        coeff = a
    else:
        a0 = float(a)
        if a0 <= 0:
            raise DomainError("constant coefficient must be positive")

        def coeff(x, t):
            if x is None:
                return np.float64(a0)
            s = np.asarray(x)
            shape = s.shape[1:] if s.ndim > 1 else ()
            return np.full(shape, a0) if shape else np.float64(a0)

    def value(x, t, s):
        s = np.asarray(s, dtype=float)
        return coeff(x, t) / p * np.maximum(s - 1.0, 0.0) ** p

    def d_s(x, t, s):
        s = np.asarray(s, dtype=float)
        return coeff(x, t) * np.maximum(s - 1.0, 0.0) ** (p - 1.0)

    def d_ss(x, t, s):
        s = np.asarray(s, dtype=float)
        w = s - 1.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.where(w > 0, np.abs(w) ** (p - 2.0), 0.0)
        return coeff(x, t) * (p - 1.0) * out

    return StructureFunction(value=value, d_s=d_s, d_ss=d_ss, coefficient=coeff)


def prototype_params(
    p: float,
    a_min: float = 1.0,
    a_max: float = 1.0,
    a_lip: float = 0.0,
    **overrides,
) -> StructureParams:
    """Admissible (L, C1, K) for the prototype with coefficient range given.

    The bounds follow from dF/ds = a (s-1)_+^{p-1} and
    d2F/ds2 = a (p-1)(s-1)_+^{p-2}.
    """
    L = max(p / a_min, a_max / p)
    C1 = max(a_max, 1.0 / a_min, (p - 1.0) * a_max, 1.0 / ((p - 1.0) * a_min))
    C1 = max(C1, 1.0) + 1e-9  # the theory wants C1 strictly above 1
    K = max(a_lip, 0.0)
    kw = dict(p=p, L=L, C1=C1, K=K)
    kw.update(overrides)
    return StructureParams(**kw)


def grad_norm(xi: np.ndarray) -> float:
    """Euclidean norm of an (N, n) gradient matrix."""
    return float(np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2)))


def vector_field_A(F: StructureFunction, x, t: float, xi: np.ndarray) -> np.ndarray:
    """Degenerate field A(x,t,xi) = dF/ds(x,t,|xi|) xi / |xi|, zero at xi = 0."""
    xi = np.asarray(xi, dtype=float)
    s = grad_norm(xi)
    if s == 0.0:
        return np.zeros_like(xi)
    return float(F.d_s(np.asarray(x, dtype=float), t, s)) / s * xi


@dataclass(frozen=True)
class DegenerateField:
    """The unregularized flux A itself (epsilon = 0), for reference runs.

    Exposes the same multiplier/envelope surface as the regularized field:
    A(x,t,xi) = multiplier(x,t,|xi|) xi with multiplier = dF/ds / s (zero on
    the degeneracy ball). The envelope blows up at s -> 1+ for p < 2; such
    runs are only meaningful with gradients kept inside the unit ball.
    """

    params: StructureParams
    base: StructureFunction

    @property
    def eps(self) -> float:
        return 0.0

    def multiplier(self, x, t: float, s):
        s = np.asarray(s, dtype=float)
        ds = np.asarray(self.base.d_s(x, t, s))
        out = np.zeros_like(s)
        np.divide(ds, s, out=out, where=s > 0)
        return out

    def envelope(self, x, t: float, s):
        return self.flux_quantities(x, t, np.atleast_1d(np.asarray(s, dtype=float)))[1]

    def flux_quantities(self, x, t: float, s):
        s = np.asarray(s, dtype=float)
        mult = np.asarray(self.multiplier(x, t, s))
        out = mult.copy()
        up = s > 1.0
        if np.any(up):
            xp = x if (x is None or np.asarray(x).ndim <= 1) else np.asarray(x)[:, up]
            sp = s[up]
            ds = np.asarray(self.base.d_s(xp, t, sp))
            dss = np.asarray(self.base.d_ss(xp, t, sp))
            out[up] += sp * np.abs(dss / sp - ds / sp**2)
        return mult, out

    def A(self, x, t: float, xi: np.ndarray) -> np.ndarray:
        return vector_field_A(self.base, x, t, xi)


@dataclass
class ConditionReport:
    """Sampling report for the growth conditions (H1)-(H4)."""

    samples: int
    seed: int
    s_max: float
    violations: dict = field(default_factory=dict)
    tightest: dict = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    def to_text(self) -> str:
        lines = [
            "structure-conditions report",
            f"samples = {self.samples}",
            f"seed = {self.seed}",
            f"s_max = {self.s_max:g}",
        ]
        for name in sorted(self.violations):
            consts = self.tightest.get(name, {})
            cs = " ".join(f"{k}={v:.6g}" for k, v in consts.items())
            lines.append(f"{name}: violations = {self.violations[name]} {cs}")
        return "\n".join(lines)


def check_structure_conditions(
    F: StructureFunction,
    params: StructureParams,
    sample_count: int,
    s_max: float = 10.0,
    t_max: float = 1.0,
    seed: int = 0,
    second_derivative_exclusion: float = 1e-6,
) -> ConditionReport:
    """Sample (H1)-(H4) on s in (1, s_max], x,y in [0,1]^n, t in (0, t_max).

    Report-only: counts violations against the constants in ``params`` and
    records the tightest empirical constants. (H3) is tested only off the
    kink |s-1| > exclusion where F need not be twice differentiable.
    """
    if sample_count < 1:
        raise PreconditionError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    p, L, C1, K = params.p, params.L, params.C1, params.K
    n = params.n

    s = 1.0 + (s_max - 1.0) * rng.random(sample_count)
    x = rng.random((n, sample_count))
    y = rng.random((n, sample_count))
    t = t_max * rng.random(sample_count)
    slack = 1e-9  # relative; absorbs roundoff at equality cases

    report = ConditionReport(samples=sample_count, seed=seed, s_max=s_max)

    def record(name, lower, upper, quantity):
        bad = (quantity < lower * (1 - slack) - slack) | (
            quantity > upper * (1 + slack) + slack
        )
        report.violations[name] = int(np.count_nonzero(bad))

    # H1: (1/L)(s-1)^p <= F <= L s^p
    Fv = np.asarray(F.value(x, t, s), dtype=float)
    lo = (s - 1.0) ** p / L
    hi = L * s**p
    record("H1", lo, hi, Fv)
    pos = Fv > 0
    report.tightest["H1"] = {
        "L_lower": float(np.max((s - 1.0) ** p / np.where(pos, Fv, np.inf))),
        "L_upper": float(np.max(Fv / s**p)),
    }

    # H2: (1/C1)(s-1)^{p-1} <= dF/ds <= C1 (s-1)^{p-1}
    ds = np.asarray(F.d_s(x, t, s), dtype=float)
    w1 = (s - 1.0) ** (p - 1.0)
    record("H2", w1 / C1, C1 * w1, ds)
    report.tightest["H2"] = {
        "C1_lower": float(np.max(w1 / np.where(ds > 0, ds, np.inf))),
        "C1_upper": float(np.max(ds / w1)),
    }

    # H3: same sandwich for d2F/ds2, off the kink
    mask = np.abs(s - 1.0) > second_derivative_exclusion
    dss = np.asarray(F.d_ss(x[:, mask], t[mask], s[mask]), dtype=float)
    w2 = (s[mask] - 1.0) ** (p - 2.0)
    bad = (dss < w2 / C1 * (1 - slack) - slack) | (dss > C1 * w2 * (1 + slack) + slack)
    report.violations["H3"] = int(np.count_nonzero(bad))
    report.tightest["H3"] = {
        "C1_lower": float(np.max(w2 / np.where(dss > 0, dss, np.inf))),
        "C1_upper": float(np.max(dss / w2)),
    }

    # H4: |dF/ds(x) - dF/ds(y)| <= K |x-y| s^{p-1}
    dsy = np.asarray(F.d_s(y, t, s), dtype=float)
    gap = np.abs(ds - dsy)
    dist = np.sqrt(np.sum((x - y) ** 2, axis=0))
    cap = K * dist * s ** (p - 1.0)
    bad = gap > cap * (1 + slack) + slack
    report.violations["H4"] = int(np.count_nonzero(bad))
    denom = dist * s ** (p - 1.0)
    report.tightest["H4"] = {
        "K": float(np.max(gap / np.where(denom > 0, denom, np.inf)))
    }
    return report
