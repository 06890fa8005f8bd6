"""Structured-text configuration files and named data presets.

Files are `key = value` lines; `#` starts a comment. Values may be ints,
floats, fractions like 1/32, bracketed lists, or bare words. Parse errors
carry file and line diagnostics.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .calculus import exponent_table
from .errors import PreconditionError
from .grids import ParabolicCylinder, SpaceTimeGrid, make_grid
from .regularization import RegularizedField
from .solver import SolverConfig
from .structure import DegenerateField, StructureParams, make_prototype, prototype_params
from .studies import StudySpec


class ConfigError(ValueError):
    pass


def _parse_scalar(tok: str):
    tok = tok.strip()
    if "/" in tok:
        num, _, den = tok.partition("/")
        try:
            return float(num) / float(den)
        except ValueError:
            return tok
    for cast in (int, float):
        try:
            return cast(tok)
        except ValueError:
            continue
    return tok


def parse_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key or not val:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if val.startswith("["):
            if not val.endswith("]"):
                raise ConfigError(f"{path}:{lineno}: unterminated list")
            items = [t for t in val[1:-1].split(",") if t.strip()]
            out[key] = [_parse_scalar(t) for t in items]
        else:
            out[key] = _parse_scalar(val)
    return out


# ---------------------------------------------------------------------------
# data presets


def _component_scale(N: int) -> np.ndarray:
    return 1.0 / (1.0 + np.arange(N))


def make_datum(name: str, grid: SpaceTimeGrid, N: int, amplitude: float = 1.0,
               shift: float = 0.0):
    """Named nodal datum of shape (N, m, ..., m)."""
    x = grid.coords()
    scale = _component_scale(N)
    if name == "zero":
        return np.zeros((N,) + grid.shape)
    if name == "tent":
        base = np.minimum(x[0], 1.0 - x[0])  # |grad| = 1 away from the ridge
    elif name == "cosine":
        base = np.ones(grid.shape)
        for k in range(grid.n):
            base = base * np.cos(np.pi * x[k])
    elif name == "sine":
        base = np.ones(grid.shape)
        for k in range(grid.n):
            base = base * np.sin(2.0 * np.pi * x[k])
    elif name == "bump":
        base = np.ones(grid.shape)
        for k in range(grid.n):
            base = base * np.sin(np.pi * x[k])
    elif name == "linear":
        base = x[0]
    elif name == "const":
        base = np.ones(grid.shape)
    else:
        raise ConfigError(f"unknown datum preset {name!r}")
    return shift + amplitude * scale[(slice(None),) + (None,) * grid.n] * base[None]


def make_coefficient(spec):
    """Coefficient preset -> (callable or constant, a_min, a_max, a_lip)."""
    if isinstance(spec, (int, float)):
        return float(spec), float(spec), float(spec), 0.0
    if spec == "one":
        return 1.0, 1.0, 1.0, 0.0
    if spec == "one_plus_absx":

        def a(x, t):
            x = np.asarray(x, dtype=float)
            return 1.0 + np.sqrt(np.sum(x**2, axis=0))

        return a, 1.0, 1.0 + np.sqrt(3.0), 1.0
    raise ConfigError(f"unknown coefficient preset {spec!r}")


# ---------------------------------------------------------------------------
# builders


def build_solver_config(cfg: dict, cells: int | None = None,
                        eps: float | None = None) -> SolverConfig:
    """SolverConfig from a parsed mapping, with optional (cells, eps) override."""
    try:
        n = int(cfg.get("n", 2))
        N = int(cfg.get("N", 1))
        p = float(cfg["p"])
        h = float(cfg.get("h", 1.0 / 32.0))
        T = float(cfg.get("T", 0.05))
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc}") from exc
    cells = cells if cells is not None else int(round(1.0 / h))
    eps = float(cfg.get("epsilon", 0.05)) if eps is None else float(eps)

    a_spec, a_min, a_max, a_lip = make_coefficient(cfg.get("coefficient_a", "one"))
    kw = dict(
        delta=float(cfg.get("delta", 1.0)),
        epsilon=eps,
        n=n,
        N=N,
    )
    if "beta" in cfg:
        kw["beta"] = float(cfg["beta"])
    for name in ("L", "C1", "K"):
        if name in cfg:
            kw[name] = float(cfg[name])
    params = prototype_params(p, a_min=a_min, a_max=a_max, a_lip=a_lip, **kw)

    base = make_prototype(params, a_spec)
    field = (
        RegularizedField(params=params, base=base)
        if eps > 0
        else DegenerateField(params=params, base=base)
    )
    grid = make_grid(n, cells, T)
    g = make_datum(
        str(cfg.get("boundary_g", "zero")), grid, N,
        amplitude=float(cfg.get("g_amplitude", 1.0)),
        shift=float(cfg.get("g_shift", 0.0)),
    )
    f_name = str(cfg.get("datum_f", "zero"))
    f = None
    if f_name != "zero":
        f = make_datum(f_name, grid, N, amplitude=float(cfg.get("f_amplitude", 1.0)))
    return SolverConfig(
        params=params,
        grid=grid,
        field=field,
        g=g,
        f=f,
        cfl_safety=float(cfg.get("cfl_safety", 0.25)),
        snapshot_every=int(cfg.get("snapshot_every", 0)),
    )


def build_study_spec(cfg: dict, out_dir=None) -> StudySpec:
    if "study" not in cfg:
        raise ConfigError("missing 'study' key")
    n = int(cfg.get("n", 2))
    p = float(cfg["p"])
    beta = float(cfg["beta"]) if "beta" in cfg else None
    table = exponent_table(n, p, beta)
    h = float(cfg.get("h", 1.0 / 32.0))
    cells = int(round(1.0 / h))

    cylinder = None
    if "r" in cfg and "z1" in cfg:
        z1 = [float(v) for v in cfg["z1"]]
        if len(z1) != n + 1:
            raise ConfigError(f"z1 must list {n} coordinates then t1")
        cylinder = ParabolicCylinder(center=tuple(z1[:-1]), t1=z1[-1], r=float(cfg["r"]))

    ladder = tuple(float(v) for v in cfg.get("eps_ladder", [cfg.get("epsilon", 0.05)]))
    refinement = tuple(int(round(1.0 / float(v))) if float(v) < 1 else int(v)
                       for v in cfg.get("refinement_ladder", []))
    return StudySpec(
        kind=str(cfg["study"]),
        build=lambda c, e: build_solver_config(cfg, cells=c, eps=e),
        cells=cells,
        eps_ladder=ladder,
        table=table,
        delta=float(cfg.get("delta", 1.0)),
        cylinder=cylinder,
        s_fraction=float(cfg.get("s", 0.5)),
        eps_ref=float(cfg["eps_ref"]) if "eps_ref" in cfg else None,
        refinement=refinement,
        k_max=int(cfg.get("k_max", 6)),
        eps_ladder_b=tuple(float(v) for v in cfg.get("eps_ladder_b", [])),
        zygmund_alpha=float(cfg["zygmund_alpha"]) if "zygmund_alpha" in cfg else None,
        out_dir=out_dir,
    )
