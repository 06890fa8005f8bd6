"""Reproducible quantitative studies on top of the solver.

Each study is deterministic given its spec and writes CSV tables with a
fixed column contract. The reference solution in the convergence studies is
the smallest-eps run on the same grid (the continuous weak solution has no
closed form); ladder runs share one fixed time step so fields can be
compared at identical times.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .calculus import ExponentTable, luxemburg_norm, moser_sequence
from .errors import PreconditionError
from .grids import GridField, ParabolicCylinder, gradient
from .solver import SolverConfig, SolverRun, max_principle_monitor, solve


@dataclass
class StudySpec:
    """One study: base configuration builder plus ladders and cylinders.

    ``build(cells, eps)`` must return a fresh SolverConfig; eps = 0 asks for
    the unregularized field.
    """

    kind: str
    build: Callable[[int, float], SolverConfig]
    cells: int
    eps_ladder: tuple
    table: ExponentTable
    delta: float
    cylinder: Optional[ParabolicCylinder] = None
    s_fraction: float = 0.5
    eps_ref: Optional[float] = None
    refinement: tuple = ()
    k_max: int = 6
    eps_ladder_b: tuple = ()
    zygmund_alpha: Optional[float] = None
    out_dir: Optional[str] = None

    def validate(self) -> None:
        lad = tuple(self.eps_ladder)
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise PreconditionError("eps ladder must be strictly decreasing")
        p = self.table.p
        cap = min(0.5, (self.delta / 4.0) ** (p - 1.0))
        for e in lad + tuple(self.eps_ladder_b):
            if not 0.0 < e < cap:
                raise PreconditionError(
                    f"eps={e} outside the admissible range (0, {cap:g}) for delta={self.delta}"
                )
        if self.eps_ref is not None and self.eps_ref >= min(lad):
            raise PreconditionError("the reference eps must sit below the ladder")
        if self.cylinder is not None:
            probe = self.build(self.cells, lad[0])
            if not self.cylinder.fits_inside(probe.grid):
                raise PreconditionError("cylinder must sit compactly inside the domain")
            if not 0.0 < self.s_fraction < 1.0:
                raise PreconditionError("s must lie in (0, 1)")


@dataclass
class StudyResult:
    kind: str
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)
    passed: bool = True

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in self.columns])

    def summary_text(self) -> str:
        lines = [f"study = {self.kind}", f"passed = {self.passed}"]
        for key in sorted(self.summary):
            lines.append(f"{key} = {_fmt(self.summary[key])}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# shared helpers


def _fixed_dt_for(configs, margin: float = 1.25) -> float:
    """A common stable step for a family of runs.

    Envelope cap: maximum pointwise envelope over gradient sizes up to
    1.25x the largest initial face-gradient norm across the family; for
    x-dependent coefficients the cap is sampled at box corners and centre.
    The per-step stability guard of fixed-dt runs still backstops the cap.
    """
    from itertools import product

    from .grids import face_gradients

    dt = np.inf
    for cfg in configs:
        smax = 0.0
        for G in face_gradients(cfg.g, cfg.grid.h):
            smax = max(smax, float(np.max(np.sqrt(np.sum(G**2, axis=(0, 1))))))
        sgrid = np.linspace(0.0, max(margin * smax, 1e-3), 512)
        lam = 0.0
        for corner in product((0.0, 0.5, 1.0), repeat=cfg.grid.n):
            xp = np.tile(np.asarray(corner)[:, None], (1, sgrid.size))
            lam = max(lam, float(np.max(cfg.field.envelope(xp, 0.0, sgrid))))
        dt = min(dt, cfg.cfl_safety * cfg.grid.h**2 / max(lam, 1.0))
    return dt


def _h_delta_levels(snapshots: GridField, delta: float) -> GridField:
    """H_delta(Du) nodal scalar field per stored level."""
    h = snapshots.grid.h
    out = np.empty((snapshots.values.shape[0], 1) + snapshots.grid.shape)
    for lvl in range(snapshots.values.shape[0]):
        G = gradient(snapshots.values[lvl], h)
        s = np.sqrt(np.sum(G**2, axis=(0, 1)))
        out[lvl, 0] = np.maximum(1.0 + delta, s)
    return GridField(grid=snapshots.grid, values=out, times=snapshots.times)


def _lp_norm(diff: np.ndarray, h: float, n: int, dt: float, p: float) -> float:
    """Space-time L^p norm of a (levels, N, ...) difference field."""
    return float((h**n * dt * np.sum(np.abs(diff) ** p)) ** (1.0 / p))


class _CylinderTracker:
    """Streams sup/mean statistics of H_delta(Du) during a run.

    Means are node-count means over the nodes inside each cylinder, matching
    the midpoint-rule cylinder_mean on uniformly stepped runs.
    """

    def __init__(self, grid, delta, sup_cyl, mean_cyls):
        self.grid = grid
        self.delta = delta
        self.h = grid.h
        self.sup_cyl = sup_cyl
        self.sup_mask = sup_cyl.space_mask(grid)
        self.sup_val = -np.inf
        self.mean_cyls = list(mean_cyls)
        self.masks = [c.space_mask(grid) for (c, _) in self.mean_cyls]
        self.sums = [0.0] * len(self.mean_cyls)
        self.counts = [0] * len(self.mean_cyls)
        starts = [c.t1 - c.r**2 for (c, _) in self.mean_cyls]
        self.t_lo = min([sup_cyl.t1 - sup_cyl.r**2] + starts)
        self.t_hi = max([sup_cyl.t1] + [c.t1 for (c, _) in self.mean_cyls])

    def __call__(self, k: int, t: float, u: np.ndarray) -> None:
        tol = 1e-12
        if t < self.t_lo + tol or t > self.t_hi + tol:
            return
        G = gradient(u, self.h)
        H = np.maximum(1.0 + self.delta, np.sqrt(np.sum(G**2, axis=(0, 1))))
        c = self.sup_cyl
        if c.t1 - c.r**2 + tol < t <= c.t1 + tol:
            self.sup_val = max(self.sup_val, float(np.max(H[self.sup_mask])))
        for i, (cyl, expo) in enumerate(self.mean_cyls):
            if cyl.t1 - cyl.r**2 + tol < t <= cyl.t1 + tol:
                vals = H[self.masks[i]]
                self.sums[i] += float(np.sum(vals**expo))
                self.counts[i] += vals.size

    def means(self):
        return [s / c if c else np.nan for s, c in zip(self.sums, self.counts)]


# ---------------------------------------------------------------------------
# studies


def study_eps_convergence(spec: StudySpec) -> StudyResult:
    """Distance of ladder runs to the smallest-eps reference.

    D(eps) = ||G_delta(Du_eps) - G_delta(Du_ref)||_{L^p(Q')} and
    S(eps) = sup_t ||u_eps - u_ref||_{L^2}^2 must be (essentially)
    nonincreasing along the ladder; the fitted log-log slope of D is
    reported against the convergence-rate exponent nu as an upper-bound
    comparison only.
    """
    spec.validate()
    if spec.eps_ref is None:
        raise PreconditionError("eps-convergence needs a reference eps")
    from .calculus import g_delta_of_gradient

    eps_all = tuple(spec.eps_ladder) + (spec.eps_ref,)
    configs = [spec.build(spec.cells, e) for e in eps_all]
    dt = _fixed_dt_for(configs)
    runs = []
    for cfg in configs:
        cfg.fixed_dt = dt
        cfg.snapshot_every = 1
        runs.append(solve(cfg))
    ref = runs[-1]
    p = spec.table.p
    n = spec.table.n
    h = configs[0].grid.h

    def g_field(run):
        vals = run.snapshots.values
        out = np.empty((vals.shape[0],) + vals.shape[1:2] + (n,) + vals.shape[2:])
        for lvl in range(vals.shape[0]):
            out[lvl] = g_delta_of_gradient(spec.delta, gradient(vals[lvl], h))
        return out

    g_ref = g_field(ref)
    rows = []
    for eps, run in zip(spec.eps_ladder, runs[:-1]):
        if not np.allclose(run.snapshots.times, ref.snapshots.times, atol=1e-12):
            raise PreconditionError("ladder runs drifted off the common time grid")
        D = _lp_norm(g_field(run) - g_ref, h, n, dt, p)
        diff = run.snapshots.values - ref.snapshots.values
        S = float(np.max(h**n * np.sum(diff**2, axis=tuple(range(1, diff.ndim)))))
        rows.append({"eps": eps, "D": D, "S": S})

    Ds = np.array([r["D"] for r in rows])
    Ss = np.array([r["S"] for r in rows])
    strict_D = bool(np.all(np.diff(Ds) < 0))
    mono = bool(np.all(Ds[1:] <= Ds[:-1] * 1.05)) and bool(np.all(Ss[1:] <= Ss[:-1] * 1.05))
    slope = float(np.polyfit(np.log(spec.eps_ladder), np.log(np.maximum(Ds, 1e-300)), 1)[0])
    passed = strict_D and mono and slope >= 0.0
    return StudyResult(
        kind="eps-convergence",
        columns=["eps", "D", "S"],
        rows=rows,
        summary={
            "eps_ref": spec.eps_ref,
            "fitted_slope": slope,
            "nu_reference": spec.table.nu,
            "strictly_decreasing_D": strict_D,
            "monotone_within_5pct": mono,
            "fixed_dt": dt,
        },
        passed=passed,
    )


def study_uniqueness(spec: StudySpec) -> StudyResult:
    """Consistency check standing in for uniqueness of the limit problem.

    Two interleaved eps ladders are Richardson-extrapolated to eps = 0 with
    the rate exponent nu; the extrapolated limits must agree in L^2 within
    twice the distance of the finest pair.
    """
    spec.validate()
    if len(spec.eps_ladder) < 2 or len(spec.eps_ladder_b) < 2:
        raise PreconditionError("uniqueness needs two 2-point ladders")
    eps_all = tuple(spec.eps_ladder[:2]) + tuple(spec.eps_ladder_b[:2])
    configs = [spec.build(spec.cells, e) for e in eps_all]
    dt = _fixed_dt_for(configs)
    finals = []
    for cfg in configs:
        cfg.fixed_dt = dt
        finals.append(solve(cfg).final)
    nu = spec.table.nu
    h = configs[0].grid.h
    n = spec.table.n

    def extrapolate(u1, e1, u2, e2):
        th = (e2 / e1) ** nu
        return (u2 - th * u1) / (1.0 - th)

    lim_a = extrapolate(finals[0], eps_all[0], finals[1], eps_all[1])
    lim_b = extrapolate(finals[2], eps_all[2], finals[3], eps_all[3])

    def l2(u):
        return float(np.sqrt(h**n * np.sum(u**2)))

    gap = l2(lim_a - lim_b)
    d_finest = l2(finals[1] - finals[3])
    passed = gap <= 2.0 * max(d_finest, 1e-300)
    return StudyResult(
        kind="uniqueness",
        columns=["ladder", "eps_coarse", "eps_fine"],
        rows=[
            {"ladder": "a", "eps_coarse": eps_all[0], "eps_fine": eps_all[1]},
            {"ladder": "b", "eps_coarse": eps_all[2], "eps_fine": eps_all[3]},
        ],
        summary={"gap_L2": gap, "finest_pair_L2": d_finest, "rate_nu": nu,
                 "fixed_dt": dt},
        passed=passed,
    )


def study_gradient_bound(spec: StudySpec) -> StudyResult:
    """Implied constant of the sup-bound across a refinement/eps ladder.

    Supercritical: LHS = sup_{Q_{sr}} H_delta(Du_eps), RHS_core =
    [mean_{Q_r} H_delta^p]^{1/kappa}, prefactor (1-s)^{-(n_hat+2)/kappa}.
    Subcritical (f = 0): RHS_core = [...]^{1/p} with prefactor
    (1+||u||_inf^2)^{(n+2)/(2p)} / ((1-s)^2 r)^{(n+2)/p}. Any Zygmund-datum
    factor is folded into the implied constant; the study asserts
    max c_impl <= 2 median c_impl.
    """
    spec.validate()
    if spec.cylinder is None:
        raise PreconditionError("gradient-bound study needs a cylinder")
    t = spec.table
    sfr = spec.s_fraction
    cyl = spec.cylinder
    sup_cyl = cyl.scaled(sfr)
    rows = []
    lux = None
    for cells in spec.refinement or (spec.cells,):
        for eps in spec.eps_ladder:
            cfg = spec.build(cells, eps)
            if t.regime == "subcritical" and not cfg.homogeneous:
                raise PreconditionError("the subcritical estimate requires f = 0")
            cfg.fixed_dt = _fixed_dt_for([cfg])
            tracker = _CylinderTracker(cfg.grid, spec.delta, sup_cyl,
                                       [(cyl, t.p)])
            run = solve(cfg, observer=tracker)
            lhs = tracker.sup_val
            mean_p = tracker.means()[0]
            if t.regime == "subcritical":
                rhs_core = mean_p ** (1.0 / t.p)
                uinf = float(np.max(np.abs(np.stack([run.umax, -run.umin]))))
                pref = (1.0 + uinf**2) ** ((t.n + 2.0) / (2.0 * t.p)) / (
                    (1.0 - sfr) ** 2 * cyl.r
                ) ** ((t.n + 2.0) / t.p)
            else:
                rhs_core = mean_p ** (1.0 / t.kappa)
                pref = (1.0 - sfr) ** (-(t.n_hat + 2.0) / t.kappa)
            if not cfg.homogeneous:
                lux = _zygmund_norm_on_cylinder(cfg, cyl, t, spec.zygmund_alpha)
            rows.append(
                {
                    "h": cfg.grid.h,
                    "eps": eps,
                    "s": sfr,
                    "lhs": lhs,
                    "rhs_core": rhs_core,
                    "c_impl": lhs / (pref * rhs_core),
                }
            )
    c = np.array([r["c_impl"] for r in rows])
    passed = bool(np.max(c) <= 2.0 * np.median(c))
    summary = {
        "regime": t.regime,
        "kappa": t.kappa,
        "max_c_impl": float(np.max(c)),
        "median_c_impl": float(np.median(c)),
        "bounded": passed,
    }
    if lux is not None:
        summary["zygmund_norm_f"] = lux
        summary["zygmund_alpha"] = spec.zygmund_alpha or (2.0 * t.n_hat + 4.0)
    return StudyResult(
        kind="gradbound",
        columns=["h", "eps", "s", "lhs", "rhs_core", "c_impl"],
        rows=rows,
        summary=summary,
        passed=passed,
    )


def _zygmund_norm_on_cylinder(cfg, cyl, table, alpha):
    """Luxemburg norm of the datum on the cylinder, Young s^q log^a(e+s)."""
    q = table.n_hat + 2.0
    a = alpha if alpha is not None else 2.0 * table.n_hat + 4.0
    mask = cyl.space_mask(cfg.grid)
    fmag = np.sqrt(np.sum(cfg.f**2, axis=0))[mask]
    depth = cyl.r**2
    w = np.full(fmag.size, cfg.grid.h**cfg.grid.n * depth)
    return luxemburg_norm(fmag, q, a, weights=w)


def study_moser_trace(spec: StudySpec) -> StudyResult:
    """Power means M_k on the nested cylinders against the sup.

    M_k = mean over Q_{r_k} of H_delta(Du_eps)^{gamma_k + frak_p} with
    r_k = s r + (1-s) r / 2^k; M_k^{1/(gamma_k+frak_p)} must grow toward
    the sup over Q_{sr} (power mean -> sup) and reach it within 10% at the
    final k on desk grids. Exponents are capped so H^exponent stays
    representable.
    """
    spec.validate()
    if spec.cylinder is None:
        raise PreconditionError("moser study needs a cylinder")
    cfg = spec.build(spec.cells, spec.eps_ladder[0])
    cfg.fixed_dt = _fixed_dt_for([cfg])
    cyl = spec.cylinder
    seq, k_used, truncated = _capped_sequence(spec)
    cylinders = [(cyl.scaled(_rk_fraction(spec.s_fraction, k)), seq.targets[k])
                 for k in range(k_used + 1)]
    tracker = _CylinderTracker(cfg.grid, spec.delta, cyl.scaled(spec.s_fraction),
                               cylinders)
    solve(cfg, observer=tracker)
    return _moser_result(spec, seq, k_used, truncated, tracker.means(),
                         tracker.sup_val)


def moser_trace_of_field(spec: StudySpec, h_field: GridField) -> StudyResult:
    """Moser bookkeeping on a prescribed H_delta-like scalar field."""
    if spec.cylinder is None:
        raise PreconditionError("moser trace needs a cylinder")
    from .grids import cylinder_mean, cylinder_sup

    cyl = spec.cylinder
    seq, k_used, truncated = _capped_sequence(spec)
    means = [
        cylinder_mean(h_field, cyl.scaled(_rk_fraction(spec.s_fraction, k)),
                      exponent=seq.targets[k])
        for k in range(k_used + 1)
    ]
    sup_val = cylinder_sup(h_field, cyl.scaled(spec.s_fraction))
    return _moser_result(spec, seq, k_used, truncated, means, sup_val)


def _rk_fraction(s: float, k: int) -> float:
    return s + (1.0 - s) / 2.0**k


def _capped_sequence(spec: StudySpec, cap: float = 80.0):
    seq = moser_sequence(spec.table, max(spec.k_max, 1))
    k_used = int(np.max(np.nonzero(seq.targets <= cap)[0]))
    return seq, k_used, k_used < spec.k_max


def _moser_result(spec, seq, k_used, truncated, means, sup_val) -> StudyResult:
    rows = []
    for k in range(k_used + 1):
        target = seq.targets[k]
        rows.append(
            {
                "k": k,
                "r_k": _rk_fraction(spec.s_fraction, k) * spec.cylinder.r,
                "gamma_k": float(seq.gammas[k]),
                "exponent": float(target),
                "M_k": means[k],
                "normalized": means[k] ** (1.0 / target),
            }
        )
    normalized = np.array([r["normalized"] for r in rows])
    nondecreasing = bool(np.all(np.diff(normalized) >= -1e-9 * normalized[:-1]))
    within = bool(normalized[-1] >= 0.9 * sup_val)
    below = bool(np.all(normalized <= sup_val * (1 + 1e-9)))
    return StudyResult(
        kind="moser",
        columns=["k", "r_k", "gamma_k", "exponent", "M_k", "normalized"],
        rows=rows,
        summary={
            "sup_ref": sup_val,
            "k_max_used": k_used,
            "truncated_by_overflow_guard": truncated,
            "nondecreasing": nondecreasing,
            "within_10pct_at_kmax": within,
            "below_sup": below,
        },
        passed=nondecreasing and within and below,
    )


def study_max_principle(spec: StudySpec) -> StudyResult:
    """Homogeneous run; componentwise bounds against the datum sup."""
    spec.validate()
    cfg = spec.build(spec.cells, spec.eps_ladder[0])
    run = solve(cfg)
    bound = float(np.max(np.sqrt(np.sum(cfg.g**2, axis=0))))
    rep = max_principle_monitor(run, bound)
    rows = [
        {
            "p": spec.table.p,
            "n": spec.table.n,
            "h": cfg.grid.h,
            "bound": bound,
            "violations": rep.violations,
            "worst_excess": rep.worst_excess,
        }
    ]
    return StudyResult(
        kind="maxprinciple",
        columns=["p", "n", "h", "bound", "violations", "worst_excess"],
        rows=rows,
        summary={"refused": rep.refused, "violations": rep.violations,
                 "steps": int(run.ts.size - 1)},
        passed=(not rep.refused) and rep.violations == 0,
    )


STUDIES = {
    "eps-convergence": study_eps_convergence,
    "uniqueness": study_uniqueness,
    "gradbound": study_gradient_bound,
    "moser": study_moser_trace,
    "maxprinciple": study_max_principle,
}


def run_study(spec: StudySpec) -> StudyResult:
    if spec.kind not in STUDIES:
        raise PreconditionError(f"unknown study kind {spec.kind!r}")
    result = STUDIES[spec.kind](spec)
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_csv(out / f"{spec.kind}.csv")
        (out / f"{spec.kind}_summary.txt").write_text(result.summary_text() + "\n")
    return result
