"""Explicit time stepping for the regularized Cauchy-Dirichlet problem.

The scheme is forward Euler on the conservative form

    u^{m+1} = u^m + dt (div A*(x, t, Du^m) + f_eps)     at interior nodes,
    u^{m+1} = g                                         on the boundary,

with face fluxes A*(x,t,G)[:,k] = multiplier(|G|) G[:,k] built from the
face-averaged gradient G. Explicit Euler is used deliberately: the
regularized flux is non-smooth across the transition band, which makes
Newton-type implicit solvers fragile, while the regularization guarantees a
finite ellipticity envelope for the step-size control.

The step size is dt = cfl_safety h^2 / max(Lambda, 1), where Lambda is the
largest pointwise ellipticity envelope h_eps + s |dh_eps/ds| over the face
gradients (the sharp form of the upper ellipticity bound, before absorbing
constants). The unit floor keeps dt bounded when the flux degenerates
identically. With 2 n cfl_safety <= 1 the update is a positive combination
of neighbour values, so the discrete maximum principle holds per component.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, DomainError, PreconditionError
from .grids import GridField, SpaceTimeGrid, divergence_of_flux, face_gradients, gradient
from .structure import StructureParams

Observer = Callable[[int, float, np.ndarray], None]


@dataclass
class SolverConfig:
    """Everything one run needs; ``field`` supplies multiplier/envelope."""

    params: StructureParams
    grid: SpaceTimeGrid
    field: object
    g: np.ndarray                      # (N, m, ..., m) boundary + initial datum
    f: Optional[np.ndarray] = None     # (N, m, ..., m) inhomogeneity, or None
    cfl_safety: float = 0.25
    blowup_threshold: float = 1e12
    snapshot_every: int = 0            # 0: first and last level only
    fixed_dt: Optional[float] = None   # common-step mode for ladder comparisons

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.g.shape != (self.params.N,) + self.grid.shape:
            raise PreconditionError(
                f"datum shape {self.g.shape} incompatible with grid/N"
            )
        if self.f is not None:
            self.f = np.asarray(self.f, dtype=float)
            if self.f.shape != self.g.shape:
                raise PreconditionError("f must match the shape of g")
        if not 0.0 < self.cfl_safety < 1.0:
            raise PreconditionError("cfl_safety must lie in (0, 1)")

    @property
    def homogeneous(self) -> bool:
        return self.f is None or not np.any(self.f)


@dataclass
class SolverState:
    u: np.ndarray
    t: float
    step_count: int


@dataclass
class SolverRun:
    """Trajectory snapshots plus per-step monitors."""

    config: SolverConfig
    snapshots: GridField
    ts: np.ndarray
    dts: np.ndarray
    umax: np.ndarray       # (steps+1, N) componentwise max
    umin: np.ndarray
    grad_max: np.ndarray   # max face-gradient norm per step
    energy: np.ndarray     # h^n sum |u|^2
    final: np.ndarray

    def monitor_text(self) -> str:
        lines = [
            "solver-run monitors",
            f"steps = {self.ts.size - 1}",
            f"t_final = {self.ts[-1]:.17g}",
            f"max_abs_u = {np.max(np.abs(np.stack([self.umax, -self.umin]))):.17g}",
            f"max_grad = {np.max(self.grad_max):.17g}",
            f"energy_initial = {self.energy[0]:.17g}",
            f"energy_final = {self.energy[-1]:.17g}",
        ]
        return "\n".join(lines)


def truncate_datum(f: np.ndarray, eps: float) -> np.ndarray:
    """Componentwise clamp of f to [-1/eps, 1/eps]."""
    if not 0.0 < eps < 0.5:
        raise DomainError(f"truncation needs eps in (0, 1/2), got {eps}")
    f = np.asarray(f, dtype=float)
    return np.clip(f, -1.0 / eps, 1.0 / eps)


class _Workspace:
    """Per-run cached geometry: interior slice and face coordinates."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        n = cfg.grid.n
        self.h = cfg.grid.h
        self.interior = (slice(None),) + (slice(1, -1),) * n
        needs_x = getattr(cfg.field, "base", None) is not None and getattr(
            cfg.field.base, "coefficient", None
        ) is not None
        self.face_coords = [None] * n
        if needs_x and not _coefficient_is_constant(cfg):
            coords = cfg.grid.coords()
            for k in range(n):
                lo = [slice(None)] * (n + 1)
                hi = [slice(None)] * (n + 1)
                lo[k + 1], hi[k + 1] = slice(0, -1), slice(1, None)
                self.face_coords[k] = 0.5 * (coords[tuple(lo)] + coords[tuple(hi)])

    def face_data(self, u: np.ndarray, t: float):
        """Face fluxes (normal components), max envelope and max |G|."""
        cfg = self.cfg
        faces = face_gradients(u, self.h)
        fluxes = []
        lam = 0.0
        gmax = 0.0
        for k, G in enumerate(faces):
            s = np.sqrt(np.sum(G**2, axis=(0, 1)))
            x = self.face_coords[k]
            mult, env = cfg.field.flux_quantities(x, t, s)
            fluxes.append(mult * G[:, k])
            lam = max(lam, float(np.max(env)))
            gmax = max(gmax, float(np.max(s, initial=0.0)))
        return fluxes, lam, gmax


def _coefficient_is_constant(cfg: SolverConfig) -> bool:
    coeff = cfg.field.base.coefficient
    probe = np.stack([np.zeros(3), np.linspace(0, 1, 3)] + [np.linspace(0, 0.5, 3)] * (cfg.grid.n - 2))[: cfg.grid.n]
    vals = np.asarray(coeff(probe, 0.0))
    return bool(np.all(vals == vals.flat[0])) if vals.ndim else True


def stable_dt(state: SolverState, cfg: SolverConfig) -> float:
    """cfl_safety h^2 / max(Lambda, 1) with Lambda the face-envelope max."""
    ws = _Workspace(cfg)
    _, lam, _ = ws.face_data(state.u, state.t)
    return cfg.cfl_safety * cfg.grid.h**2 / max(lam, 1.0)


def step(state: SolverState, cfg: SolverConfig, dt: Optional[float] = None) -> SolverState:
    """One accepted explicit step.

    The boundary keeps the datum g exactly: the update never touches
    boundary nodes and the initial state carries g there.
    """
    ws = _Workspace(cfg)
    f_eff = _effective_f(cfg)
    unew, dt_used, _ = _advance(state.u, state.t, ws, f_eff, dt)
    return SolverState(u=unew, t=state.t + dt_used, step_count=state.step_count + 1)


def _effective_f(cfg: SolverConfig):
    if cfg.f is None:
        return None
    eps = cfg.field.eps
    return truncate_datum(cfg.f, eps) if eps > 0 else cfg.f.copy()


def _advance(u, t, ws: _Workspace, f_eff, dt_force=None):
    cfg = ws.cfg
    fluxes, lam, gmax = ws.face_data(u, t)
    dt_stable = cfg.cfl_safety * ws.h**2 / max(lam, 1.0)
    dt = dt_stable if dt_force is None else dt_force
    if dt > dt_stable * (1.0 + 1e-9):
        raise PreconditionError(
            f"requested dt={dt} exceeds stable dt={dt_stable} at t={t}"
        )
    div = divergence_of_flux(fluxes, ws.h)
    unew = u.copy()
    rhs = div if f_eff is None else div + f_eff
    unew[ws.interior] = u[ws.interior] + dt * rhs[ws.interior]
    if np.max(np.abs(unew)) > cfg.blowup_threshold:
        raise BlowUpError(f"solution exceeded {cfg.blowup_threshold:g} at t={t}")
    return unew, dt, gmax


def solve(
    cfg: SolverConfig,
    t_end: Optional[float] = None,
    n_steps: Optional[int] = None,
    observer: Optional[Observer] = None,
) -> SolverRun:
    """March from t = 0 with the stable step recomputed every step.

    Stops at ``t_end`` (default grid.T) or after ``n_steps``, whichever is
    first. ``observer(step_index, t, u)`` is invoked on the initial state
    and after every accepted step (for streaming statistics). With
    ``cfg.fixed_dt`` the step is pinned, erroring if stability is lost.
    """
    if t_end is None:
        t_end = cfg.grid.T
    ws = _Workspace(cfg)
    f_eff = _effective_f(cfg)

    u = cfg.g.copy()
    t = 0.0
    ts, dts, umax, umin, gmax_list, energy = [0.0], [], [], [], [], []
    snaps, snap_ts = [u.copy()], [0.0]
    hn = cfg.grid.h**cfg.grid.n

    def record(uu):
        umax.append(np.max(uu.reshape(cfg.params.N, -1), axis=1))
        umin.append(np.min(uu.reshape(cfg.params.N, -1), axis=1))
        energy.append(hn * float(np.sum(uu**2)))

    record(u)
    if observer is not None:
        observer(0, 0.0, u)

    k = 0
    while t < t_end - 1e-14 and (n_steps is None or k < n_steps):
        dt_req = None if cfg.fixed_dt is None else min(cfg.fixed_dt, t_end - t)
        if dt_req is None:
            fluxes, lam, gm = ws.face_data(u, t)
            dt = min(cfg.cfl_safety * ws.h**2 / max(lam, 1.0), t_end - t)
            div = divergence_of_flux(fluxes, ws.h)
            unew = u.copy()
            rhs = div if f_eff is None else div + f_eff
            unew[ws.interior] = u[ws.interior] + dt * rhs[ws.interior]
            if np.max(np.abs(unew)) > cfg.blowup_threshold:
                raise BlowUpError(f"solution exceeded {cfg.blowup_threshold:g} at t={t}")
        else:
            unew, dt, gm = _advance(u, t, ws, f_eff, dt_req)
        u = unew
        t += dt
        k += 1
        ts.append(t)
        dts.append(dt)
        gmax_list.append(gm)
        record(u)
        if observer is not None:
            observer(k, t, u)
        if cfg.snapshot_every and (k % cfg.snapshot_every == 0):
            snaps.append(u.copy())
            snap_ts.append(t)

    if snap_ts[-1] != t:
        snaps.append(u.copy())
        snap_ts.append(t)

    snapshots = GridField(grid=cfg.grid, values=np.stack(snaps),
                          times=np.asarray(snap_ts))

    return SolverRun(
        config=cfg,
        snapshots=snapshots,
        ts=np.asarray(ts),
        dts=np.asarray(dts) if dts else np.zeros(0),
        umax=np.asarray(umax),
        umin=np.asarray(umin),
        grad_max=np.asarray(gmax_list) if gmax_list else np.zeros(0),
        energy=np.asarray(energy),
        final=u,
    )


@dataclass
class MaxPrincipleReport:
    refused: bool
    reason: str = ""
    bound: float = 0.0
    violations: int = 0
    worst_excess: float = 0.0
    locations: list = field(default_factory=list)

    def to_text(self) -> str:
        if self.refused:
            return f"max-principle monitor refused: {self.reason}"
        return (
            "max-principle report\n"
            f"bound = {self.bound:.17g}\n"
            f"violations = {self.violations}\n"
            f"worst_excess = {self.worst_excess:.3e}"
        )


def max_principle_monitor(run: SolverRun, reference_bound: float) -> MaxPrincipleReport:
    """Check u^i(x, t) in [-k, k] per step, k = reference_bound, f = 0 only.

    The tolerance is 10 machine epsilons relative to k; violations are
    counted per (step, component) and the first few located.
    """
    if not run.config.homogeneous:
        return MaxPrincipleReport(
            refused=True, reason="the maximum principle is stated for f = 0"
        )
    k = float(reference_bound)
    tol = 10.0 * np.finfo(float).eps * max(k, 1.0)
    over = run.umax - k
    under = -k - run.umin
    excess = np.maximum(over, under)
    bad = excess > tol
    locations = [
        (int(i), int(c), float(excess[i, c]))
        for i, c in zip(*np.nonzero(bad))
    ][:10]
    return MaxPrincipleReport(
        refused=False,
        bound=k,
        violations=int(np.count_nonzero(bad)),
        worst_excess=float(np.max(excess)),
        locations=locations,
    )
