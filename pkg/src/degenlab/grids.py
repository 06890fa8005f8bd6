"""Uniform space-time grids and discrete field calculus.

Fields live on the unit box [0,1]^n (n in {1,2,3}; n=1 is supported for
cheap solver debugging only and sits outside the n >= 2 analysis). Vector
fields carry shape (levels, N, m, ..., m); gradients are second-order
central differences with one-sided second-order stencils on the boundary.
The conservative divergence acts on face-valued fluxes and satisfies
summation by parts against compactly supported test fields exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, EmptyCylinderError, PreconditionError


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform grid on [0,1]^n x (0, T): spacing h = 1/cells, step dt."""

    n: int
    cells: int
    T: float
    dt: float
    levels: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise PreconditionError("spatial dimension must be 1, 2 or 3 at desk scale")
        if self.cells < 2:
            raise PreconditionError("need at least 2 cells per direction")
        if self.T <= 0 or self.dt <= 0:
            raise PreconditionError("T and dt must be positive")
        span = self.dt * (self.levels - 1)
        if self.levels > 1 and abs(span - self.T) > 1e-9 * max(self.T, 1.0):
            raise PreconditionError(
                f"dt * (levels-1) = {span} does not reach T = {self.T}"
            )

    @property
    def h(self) -> float:
        return 1.0 / self.cells

    @property
    def shape(self) -> tuple:
        return (self.cells + 1,) * self.n

    @property
    def num_nodes(self) -> int:
        return (self.cells + 1) ** self.n

    def axis_coords(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.cells + 1)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (n, m, ..., m)."""
        axes = np.meshgrid(*([self.axis_coords()] * self.n), indexing="ij")
        return np.stack(axes, axis=0)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.levels)


def make_grid(n: int, cells: int, T: float, levels: int | None = None,
              dt: float | None = None) -> SpaceTimeGrid:
    if levels is None and dt is None:
        levels = 2
    if levels is None:
        levels = int(round(T / dt)) + 1
    dt = T / (levels - 1) if levels > 1 else T
    return SpaceTimeGrid(n=n, cells=cells, T=T, dt=dt, levels=levels)


@dataclass
class GridField:
    """Vector-valued nodal field: values (levels, N, m, ..., m) at ``times``."""

    grid: SpaceTimeGrid
    values: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        expected = self.grid.shape
        if self.values.ndim != 2 + self.grid.n or self.values.shape[2:] != expected:
            raise PreconditionError(
                f"field shape {self.values.shape} incompatible with grid {expected}"
            )
        if self.values.shape[0] != self.times.size:
            raise PreconditionError("one time stamp per level required")
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("field values must be finite")

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @classmethod
    def sample(cls, grid: SpaceTimeGrid, fn, N: int = 1) -> "GridField":
        """Sample fn(x, t) -> (N, *shape) on every stored level."""
        x = grid.coords()
        times = grid.times()
        vals = np.stack([np.asarray(fn(x, t), dtype=float).reshape((N,) + grid.shape)
                         for t in times])
        return cls(grid=grid, values=vals, times=times)

    def to_csv(self, path) -> None:
        """One row per node per level: t, x1..xn, u1..uN."""
        coords = self.grid.coords().reshape(self.grid.n, -1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["t"]
                + [f"x{k + 1}" for k in range(self.grid.n)]
                + [f"u{i + 1}" for i in range(self.N)]
            )
            for lvl, t in enumerate(self.times):
                flat = self.values[lvl].reshape(self.N, -1)
                for node in range(coords.shape[1]):
                    writer.writerow(
                        [f"{t:.17g}"]
                        + [f"{c:.17g}" for c in coords[:, node]]
                        + [f"{v:.17g}" for v in flat[:, node]]
                    )

    def save(self, path) -> None:
        """Binary snapshot with header {n, N, dims, h, dt, T}."""
        np.savez_compressed(
            path,
            values=self.values,
            times=self.times,
            header=np.array(
                [self.grid.n, self.N, self.grid.cells, self.grid.h, self.grid.dt,
                 self.grid.T, self.grid.levels]
            ),
        )

    @classmethod
    def load(cls, path) -> "GridField":
        data = np.load(path)
        n, _, cells, _, dt, T, levels = data["header"]
        grid = SpaceTimeGrid(n=int(n), cells=int(cells), T=float(T), dt=float(dt),
                             levels=int(levels))
        return cls(grid=grid, values=data["values"], times=data["times"])


# ---------------------------------------------------------------------------
# discrete differential operators


def gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Nodal gradient of a level (N, m, ..., m) -> (N, n, m, ..., m).

    Central differences inside, second-order one-sided stencils on the
    boundary, so the operator is O(h^2) on smooth fields everywhere.
    """
    u = np.asarray(u, dtype=float)
    n = u.ndim - 1
    out = np.empty((u.shape[0], n) + u.shape[1:])
    for k in range(n):
        out[:, k] = _axis_derivative(u, k + 1, h)
    return out


def _axis_derivative(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    d = np.empty_like(u)
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    mid = [slice(None)] * u.ndim
    lo[axis], hi[axis], mid[axis] = slice(0, -2), slice(2, None), slice(1, -1)
    d[tuple(mid)] = (u[tuple(hi)] - u[tuple(lo)]) / (2.0 * h)

    first = [slice(None)] * u.ndim
    for idx, sl in ((0, (0, 1, 2)), (-1, (-1, -2, -3))):
        s0, s1, s2 = sl
        first[axis] = idx
        a = [slice(None)] * u.ndim
        b = [slice(None)] * u.ndim
        c = [slice(None)] * u.ndim
        a[axis], b[axis], c[axis] = s0, s1, s2
        sign = 1.0 if idx == 0 else -1.0
        d[tuple(first)] = sign * (
            -3.0 * u[tuple(a)] + 4.0 * u[tuple(b)] - u[tuple(c)]
        ) / (2.0 * h)
    return d


def face_gradients(u: np.ndarray, h: float) -> list[np.ndarray]:
    """Full gradient matrices at cell faces, one array per direction.

    Direction k gets the exact two-point difference in its own column and
    the arithmetic mean of the adjacent nodal central derivatives in the
    others; this face-averaged form makes the discrete system the
    Euler-Lagrange equation of a discrete energy for x-independent F.
    """
    u = np.asarray(u, dtype=float)
    n = u.ndim - 1
    nodal = gradient(u, h)
    faces = []
    for k in range(n):
        lo = [slice(None)] * (n + 2)
        hi = [slice(None)] * (n + 2)
        lo[k + 2], hi[k + 2] = slice(0, -1), slice(1, None)
        Gk = 0.5 * (nodal[tuple(lo)] + nodal[tuple(hi)])
        ulo = [slice(None)] * (n + 1)
        uhi = [slice(None)] * (n + 1)
        ulo[k + 1], uhi[k + 1] = slice(0, -1), slice(1, None)
        Gk[:, k] = (u[tuple(uhi)] - u[tuple(ulo)]) / h
        faces.append(Gk)
    return faces


def divergence_of_flux(fluxes, h: float) -> np.ndarray:
    """Conservative divergence of face-valued fluxes.

    ``fluxes[k]`` holds the direction-k normal component at the k-faces,
    shape (N, ..., m-1 along k, ...); full (N, n, ...) face matrices are
    accepted too (their k-th column is used). Interior nodes receive the
    backward difference of face fluxes; boundary nodes are left at zero.
    Summation by parts holds exactly: sum div(W) . phi = -sum W . Dphi for
    compactly supported phi with Dphi the two-point face difference.
    """
    n = len(fluxes)
    flux0 = [np.asarray(f, dtype=float) for f in fluxes]
    flux = [f[:, k] if f.ndim == n + 2 else f for k, f in enumerate(flux0)]
    shape = list(flux[0].shape)
    shape[1] += 1  # direction-0 faces are one short along axis 0
    out = np.zeros(tuple(shape))
    for k, W in enumerate(flux):
        mid = [slice(None)] * out.ndim
        mid[k + 1] = slice(1, -1)
        lo = [slice(None)] * W.ndim
        hi = [slice(None)] * W.ndim
        lo[k + 1], hi[k + 1] = slice(0, -1), slice(1, None)
        out[tuple(mid)] += (W[tuple(hi)] - W[tuple(lo)]) / h
    return out


def steklov_average(field: GridField, lag: float) -> GridField:
    """Forward running mean [v]_h(x,t) = (1/lag) int_t^{t+lag} v ds.

    Computed exactly for the piecewise-linear-in-time interpolant of the
    stored levels (trapezoidal); zero on the final window [t_end-lag, t_end)
    as in the continuous definition. Requires uniformly spaced levels.
    """
    times = field.times
    if times.size < 2:
        raise PreconditionError("need at least two levels")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-10, atol=1e-14):
        raise PreconditionError("steklov_average requires uniform time levels")
    horizon = times[-1] - times[0]
    if not 0.0 < lag < horizon:
        raise DomainError(f"lag must lie in (0, {horizon}), got {lag}")

    v = field.values
    # cumulative trapezoid from the first level
    seg = 0.5 * dt * (v[1:] + v[:-1])
    ctrap = np.concatenate([np.zeros_like(v[:1]), np.cumsum(seg, axis=0)])

    def ctrap_at(i_float: float):
        k = int(np.floor(i_float))
        f = i_float - k
        if k >= v.shape[0] - 1:
            return ctrap[-1]
        if f == 0.0:
            return ctrap[k]
        return ctrap[k] + dt * (f * v[k] + 0.5 * f * f * (v[k + 1] - v[k]))

    out = np.zeros_like(v)
    j = lag / dt
    for lvl in range(v.shape[0]):
        if times[lvl] - times[0] >= horizon - lag - 1e-12 * max(horizon, 1.0):
            break
        out[lvl] = (ctrap_at(lvl + j) - ctrap[lvl]) / lag
    return GridField(grid=field.grid, values=out, times=times.copy())


# ---------------------------------------------------------------------------
# parabolic cylinders


@dataclass(frozen=True)
class ParabolicCylinder:
    """Backward cylinder B_r(center) x (t1 - r^2, t1]."""

    center: tuple
    t1: float
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise DomainError("width r must be positive")

    def scaled(self, s: float) -> "ParabolicCylinder":
        return ParabolicCylinder(center=self.center, t1=self.t1, r=s * self.r)

    def space_mask(self, grid: SpaceTimeGrid) -> np.ndarray:
        x = grid.coords()
        c = np.asarray(self.center, dtype=float).reshape(grid.n, *([1] * grid.n))
        dist2 = np.sum((x - c) ** 2, axis=0)
        return dist2 <= self.r**2 * (1 + 1e-12)

    def time_mask(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        t0 = self.t1 - self.r**2
        return (times > t0 + 1e-12) & (times <= self.t1 + 1e-12)

    def fits_inside(self, grid: SpaceTimeGrid, strict_margin: float = 0.0) -> bool:
        c = np.asarray(self.center, dtype=float)
        ok_space = np.all(c - self.r > strict_margin) and np.all(
            c + self.r < 1.0 - strict_margin
        )
        return bool(ok_space and self.t1 - self.r**2 > 0.0 and self.t1 <= grid.T + 1e-12)


def cylinder_values(field: GridField, cyl: ParabolicCylinder, component: int = 0):
    smask = cyl.space_mask(field.grid)
    tmask = cyl.time_mask(field.times)
    if not np.any(smask) or not np.any(tmask):
        raise EmptyCylinderError(f"cylinder r={cyl.r} t1={cyl.t1} contains no nodes")
    return field.values[tmask][:, component][:, smask]


def cylinder_mean(field: GridField, cyl: ParabolicCylinder, exponent: float = 1.0,
                  component: int = 0) -> float:
    """Midpoint-rule mean of field^exponent over the nodes inside the cylinder."""
    vals = cylinder_values(field, cyl, component)
    return float(np.mean(vals**exponent))


def cylinder_sup(field: GridField, cyl: ParabolicCylinder, component: int = 0) -> float:
    """Maximum of nodal values over the cylinder."""
    return float(np.max(cylinder_values(field, cyl, component)))
