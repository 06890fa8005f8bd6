"""Command line entry point: verify / solve / study."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import PreconditionError
from .studies import STUDIES, run_study


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="degenlab",
        description="Numerical laboratory for widely degenerate parabolic systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run all sampled property suites")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--samples", type=int, default=10000)

    ps = sub.add_parser("solve", help="run the explicit solver from a config file")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", default="runs")

    pt = sub.add_parser("study", help="run a quantitative study")
    pt.add_argument("kind", choices=sorted(STUDIES))
    pt.add_argument("--config", required=True)
    pt.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_study(args)
    except (PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _cmd_verify(args) -> int:
    from .verify import render_table, run_all

    rows = run_all(seed=args.seed, samples=args.samples)
    print(render_table(rows))
    return 0 if all(r.passed for r in rows) else 1


def _cmd_solve(args) -> int:
    from .configio import build_solver_config, parse_config
    from .grids import GridField
    from .solver import solve

    cfg_dict = parse_config(args.config)
    cfg = build_solver_config(cfg_dict)
    if cfg.snapshot_every == 0:
        cfg.snapshot_every = max(1, 10)
    run = solve(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.config).stem
    run.snapshots.to_csv(out / f"{stem}_trajectory.csv")
    (out / f"{stem}_monitors.txt").write_text(run.monitor_text() + "\n")
    print(run.monitor_text())
    print(f"wrote {out / (stem + '_trajectory.csv')}")
    return 0


def _cmd_study(args) -> int:
    from .configio import build_study_spec, parse_config

    cfg_dict = parse_config(args.config)
    cfg_dict["study"] = args.kind
    out_dir = args.out or f"studies/{args.kind}"
    spec = build_study_spec(cfg_dict, out_dir=out_dir)
    result = run_study(spec)
    print(result.summary_text())
    return 0 if result.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
