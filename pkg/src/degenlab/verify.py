"""Aggregated property suites over the structure/regularization/calculus layers.

`run_all` executes every sampled certificate and identity check with a
single seed and returns printable rows; the CLI `verify` subcommand renders
them as a pass/fail table. Deterministic for fixed (seed, samples).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus as calc
from .regularization import (
    RegularizedField,
    certify_ellipticity,
    certify_field_convergence,
    certify_g_delta,
    certify_growth,
    certify_monotonicity,
    v_eps,
    v_eps_derivatives,
)
from .structure import check_structure_conditions, make_prototype, prototype_params


@dataclass
class CheckRow:
    name: str
    samples: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _proto(p, eps, delta=1.0, N=1, n=2, a=1.0, **kw):
    params = prototype_params(p, epsilon=eps, delta=delta, N=N, n=n, **kw)
    return RegularizedField(params=params, base=make_prototype(params, a))


def run_all(seed: int = 0, samples: int = 10000) -> list[CheckRow]:
    rows: list[CheckRow] = []
    rng = np.random.default_rng(seed)

    # structure conditions on the model field, constant and Lipschitz coefficient
    params = prototype_params(2.0, epsilon=0.1, n=2)
    rep = check_structure_conditions(make_prototype(params, 1.0), params, samples, seed=seed)
    rows.append(CheckRow("structure H1-H4 (a=1)", samples, rep.total_violations))
    a = lambda x, t: 1.0 + np.sqrt(np.sum(np.asarray(x) ** 2, axis=0))
    params_a = prototype_params(2.0, a_min=1.0, a_max=1.0 + np.sqrt(2), a_lip=1.0,
                                epsilon=0.1, n=2)
    rep = check_structure_conditions(make_prototype(params_a, a), params_a, samples, seed=seed)
    rows.append(CheckRow("structure H1-H4 (a=1+|x|)", samples, rep.total_violations))

    # smoothed distance: closed forms and oracle agreement on the band
    bad = 0
    m = samples // 20 + 10
    for eps in (0.3, 0.1, 0.02):
        s_lo = rng.uniform(0.0, 1.0, m)
        s_hi = rng.uniform(1.0 + 2 * eps, 10.0, m)
        bad += int(np.count_nonzero(np.abs(v_eps(eps, s_lo) - eps) > 1e-12))
        bad += int(np.count_nonzero(np.abs(v_eps(eps, s_hi) - (s_hi - 1)) > 1e-12))
        s_band = 1.0 + 2 * eps * rng.uniform(1e-6, 1 - 1e-6, m)
        arr = v_eps(eps, s_band)
        ada = np.array([v_eps(eps, float(s)) for s in s_band[:50]])
        bad += int(np.count_nonzero(np.abs(arr[:50] - ada) > 1e-10))
        v1, v2 = v_eps_derivatives(eps, s_band)
        bad += int(np.count_nonzero((v1 < 0) | (v1 > 1) | (v2 < 0)))
        bad += int(np.count_nonzero(arr > np.maximum(2 * eps, s_band - 1) + 1e-12))
        bad += int(np.count_nonzero(arr < eps - 1e-12))
    rows.append(CheckRow("v_eps regions + band oracle", 6 * m * 3, bad))

    # growth lemma across the singular exponents
    for p in (1.2, 1.5, 1.9):
        viol = 0
        for eps in (0.02, 0.1, 0.3):
            rep = certify_growth(_proto(p, eps), samples // 3, seed=seed)
            viol += rep.total_violations
        rows.append(CheckRow(f"growth lemma p={p}", samples, viol))

    # ellipticity / modulus / monotonicity / truncation comparison
    for p in (1.5, 2.0, 3.0):
        reg = _proto(p, 0.05, delta=1.0, N=2)
        rows.append(CheckRow(
            f"ellipticity p={p}", samples,
            certify_ellipticity(reg, samples, seed=seed).total_violations,
        ))
        rows.append(CheckRow(
            f"monotonicity gap p={p}", samples,
            certify_monotonicity(reg, samples, seed=seed).total_violations,
        ))
        rows.append(CheckRow(
            f"G_delta comparison p={p}", samples,
            certify_g_delta(reg, 0.3, samples, seed=seed).total_violations,
        ))
        rows.append(CheckRow(
            f"A_eps -> A rate p={p}", samples,
            certify_field_convergence(reg, samples, seed=seed).total_violations,
        ))

    rows.append(_check_gdelta_lipschitz(seed, samples))
    rows.append(_check_h_identity(seed, samples))
    rows.append(_check_phi(seed, samples))
    rows.append(_check_products(seed))
    rows.append(_check_sequences())
    rows.append(_check_luxemburg())
    rows.append(_check_cutoffs(seed))
    return rows


def _check_gdelta_lipschitz(seed, samples) -> CheckRow:
    """|G_d(xi)-G_d(xi~)| <= 3|xi-xi~| and the inverse power comparison."""
    rng = np.random.default_rng(seed + 2)
    delta = 0.8
    bad = 0
    for _ in range(4):
        k = samples // 4
        xi = rng.standard_normal((k, 2, 2)) * rng.uniform(0, 4, (k, 1, 1))
        xit = rng.standard_normal((k, 2, 2)) * rng.uniform(0, 4, (k, 1, 1))
        G1 = calc.g_delta_of_gradient(delta, np.moveaxis(xi, 0, -1))
        G2 = calc.g_delta_of_gradient(delta, np.moveaxis(xit, 0, -1))
        dG = np.sqrt(np.sum((G1 - G2) ** 2, axis=(0, 1)))
        dxi = np.sqrt(np.sum((xi - xit) ** 2, axis=(1, 2)))
        bad += int(np.count_nonzero(dG > 3.0 * dxi + 1e-12))
        # |xi-xi~|^p <= ((2+d)/d)^p |G_d(xi)-G_d(xi~)|^p above the ball
        p = 1.7
        outside = (np.sqrt(np.sum(xi**2, axis=(1, 2))) > 1 + delta) | (
            np.sqrt(np.sum(xit**2, axis=(1, 2))) > 1 + delta
        )
        cap = ((delta + 2.0) / delta) ** p * dG[outside] ** p
        bad += int(np.count_nonzero(dxi[outside] ** p > cap * (1 + 1e-9)))
    return CheckRow("G_delta Lipschitz + power comparison", samples, bad)


def _check_h_identity(seed, samples) -> CheckRow:
    """H_d(xi) = 1 + d + |G_d(xi)| (used in the final limit passage)."""
    rng = np.random.default_rng(seed + 3)
    delta = 0.6
    xi = rng.standard_normal((samples, 1, 3)) * rng.uniform(0, 5, (samples, 1, 1))
    s = np.sqrt(np.sum(xi**2, axis=(1, 2)))
    H = calc.h_lambda_of_norm(delta, s)
    Gn = np.maximum(s - 1.0 - delta, 0.0)
    bad = int(np.count_nonzero(np.abs(H - (1.0 + delta + Gn)) > 1e-12))
    return CheckRow("H_lambda identity", samples, bad)


def _check_phi(seed, samples) -> CheckRow:
    rng = np.random.default_rng(seed + 4)
    bad = 0
    for _ in range(8):
        gamma = float(rng.uniform(0, 12))
        aa = float(rng.uniform(0.2, 3.0))
        w = rng.uniform(0, 8, samples // 8)
        try:
            calc.Phi(gamma, aa, w)  # raises if the derivative caps fail
        except AssertionError:
            bad += 1
    return CheckRow("Phi derivative bounds", samples, bad)


def _check_products(seed) -> CheckRow:
    rng = np.random.default_rng(seed + 5)
    bad = 0
    trials = 100
    for _ in range(trials):
        A = float(rng.uniform(1.001, 4.0))
        kap = float(rng.uniform(1.01, 3.0))
        alpha = float(rng.uniform(0.0, 0.9))
        C = float(rng.uniform(0.5, 4.0))
        c = float(rng.uniform(0.1, 2.0))
        for i in (0, 1, 7, 25, 50):
            try:
                calc.product_bounds(A, kap, alpha, C, c, i)
            except AssertionError:
                bad += 1
    return CheckRow("iteration product bounds", trials * 5, bad)


def _check_sequences() -> CheckRow:
    bad = 0
    for n, p in ((3, 3.0), (3, 1.6), (3, 1.2), (2, 1.5), (2, 2.0)):
        t = calc.exponent_table(n, p)
        seq = calc.moser_sequence(t, 60)
        closed = calc.moser_closed_form(t, np.arange(61))
        if np.max(np.abs(seq.gammas - closed) / np.maximum(closed, 1.0)) > 1e-12:
            bad += 1
        gap = calc.moser_recursion_identity_gap(seq)
        scale = np.maximum(seq.targets[1:], 1.0)
        if t.supercritical and np.max(np.abs(gap) / scale) > 1e-13:
            bad += 1
        if not t.supercritical and not np.all(gap > 0):
            bad += 1
        k = 40
        base = 1.0 + 2.0 / (t.n_hat if t.supercritical else t.n)
        limit = 1.0 / t.phi if t.supercritical else 1.0 / t.p
        if abs(base**k / seq.targets[k] - limit) > 1e-6:
            bad += 1
        if (t.kappa > 0) != (p > 2 * t.n_hat / (t.n_hat + 2)):
            bad += 1
    return CheckRow("moser sequences + exponents", 5 * 61, bad)


def _check_luxemburg() -> CheckRow:
    bad = 0
    for q in (1.5, 2.0, 3.0, 5.0):
        for c in (0.3, 1.0, 3.0, 10.0, 100.0):
            lam = calc.luxemburg_norm(np.full(64, c), q, 0.0)
            if abs(lam - c) > 1e-6 * c:
                bad += 1
    rng = np.random.default_rng(17)
    for _ in range(10):
        v = rng.uniform(0, 5, 256)
        lam = calc.luxemburg_norm(v, 2.0, 0.0)
        exact = float(np.sqrt(np.mean(v**2)))
        if abs(lam - exact) > 1e-6 * exact:
            bad += 1
    if calc.luxemburg_norm(np.zeros(32), 2.0, 1.0) != 0.0:
        bad += 1
    return CheckRow("luxemburg bisection", 31, bad)


def _check_cutoffs(seed) -> CheckRow:
    rng = np.random.default_rng(seed + 6)
    bad = 0
    for _ in range(12):
        r = float(rng.uniform(0.2, 1.5))
        s = float(rng.uniform(0.2, 0.8))
        k = int(rng.integers(0, 6))
        eta, omega, r_k = calc.cutoff_pair(r, s, k, t1=0.0)
        r_k1 = s * r + (1 - s) * r / 2 ** (k + 1)
        rho = np.linspace(0.0, r_k * 1.05, 1000)
        vals = eta(rho)
        grad = np.gradient(vals, rho)
        if np.max(np.abs(grad)) > 2 ** (k + 2) / ((1 - s) * r) * (1 + 1e-2):
            bad += 1
        if not np.all(vals[rho <= r_k1] == 1.0) or not np.all(vals[rho >= r_k] == 0.0):
            bad += 1
        tt = np.linspace(-(r_k**2), 0.0, 1000)
        ov = omega(tt)
        dov = np.gradient(ov, tt)
        if np.max(dov) > 2 ** (2 * k + 2) / ((1 - s) ** 2 * r**2) * (1 + 1e-2):
            bad += 1
        if np.min(dov) < -1e-12 or abs(omega(-(r_k**2))) > 0 or omega(0.0) != 1.0:
            bad += 1
        if not np.all(ov[tt >= -(r_k1**2)] == 1.0):
            bad += 1
    return CheckRow("cutoff pair bounds", 12 * 2000, bad)


def render_table(rows: list[CheckRow]) -> str:
    width = max(len(r.name) for r in rows) + 2
    lines = [f"{'check'.ljust(width)}{'samples':>9}  {'violations':>10}  status"]
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name.ljust(width)}{r.samples:>9}  {r.violations:>10}  {status}")
    total = "PASS" if all(r.passed for r in rows) else "FAIL"
    lines.append(f"overall: {total}")
    return "\n".join(lines)
