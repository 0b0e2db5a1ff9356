"""Command-line front end: run scenarios, emit equilibria, diagnose snapshots."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import config_from_mapping, load_config
from .diagnostics import hellinger, l1_distance, relative_entropy
from .errors import ConfigurationError, DomainError, NumericsError
from .equilibria import global_sir_equilibrium
from .graphon import GraphonLattice
from .grid import COMPARTMENTS, PhaseGrid, moments
from .scenario import build_initial_condition, emit_csv, emit_equilibrium, load_snapshot, run_scenario

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opidemic",
        description="Coupled opinion-epidemic kinetic simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="path to a key=value config file")
        p.add_argument("--preset", help="scenario preset name (replaces the config file)")
        p.add_argument("--out", help="output directory (overrides outputs.dir)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap; results are identical for any value")

    p_run = sub.add_parser("run", help="simulate a scenario and write all artifacts")
    common(p_run)
    p_eq = sub.add_parser("equilibrium", help="emit the analytic equilibria only")
    common(p_eq)
    p_diag = sub.add_parser("diagnose", help="compare a stored snapshot to the analytic equilibrium")
    common(p_diag)
    p_diag.add_argument("--against", required=True, help="snapshot CSV to diagnose")
    return parser


def _load(args) -> "ScenarioConfig":
    if args.config is None and args.preset is None:
        raise ConfigurationError("missing preset or custom block: pass a config file or --preset")
    if args.config is not None:
        cfg = load_config(args.config)
        if args.preset is not None:
            raise ConfigurationError("pass either a config file or --preset, not both")
    else:
        cfg = config_from_mapping({"preset": args.preset})
    if args.out is not None:
        cfg.out_dir = args.out
        cfg.effective["outputs.dir"] = args.out
    return cfg


def _diagnose(cfg, against: str):
    grid = PhaseGrid(cfg.n_x, cfg.n_w)
    lattice = GraphonLattice(cfg.graphon, grid.x)
    ic = build_initial_condition(cfg, grid)
    eq = global_sir_equilibrium(ic, moments(ic, lattice), cfg.epi, cfg.variant, lattice)
    snap = load_snapshot(against, grid)
    wq = grid.quad_weights_interior
    rows = []
    for k, J in enumerate(COMPARTMENTS):
        rows.append((f"l1_{J}", l1_distance(snap.data[k], eq.data[k], wq)))
    mass_S = float(np.sum(wq * eq.data[0]))
    snap_mass = float(np.sum(wq * snap.data[0]))
    if mass_S > 0.0 and snap_mass > 0.0:
        scaled = eq.data[0] * (snap_mass / mass_S)
        rows.append(("entropy_S", relative_entropy(snap.data[0], scaled, wq)))
        rows.append(("hellinger_S", hellinger(snap.data[0], scaled, wq)))
    return rows


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "run":
            art = run_scenario(cfg)
            files = emit_csv(art, cfg.out_dir)
            print(f"wrote {len(files)} artifacts to {cfg.out_dir}")
        elif args.command == "equilibrium":
            files = emit_equilibrium(cfg, cfg.out_dir)
            print(f"wrote {len(files)} artifacts to {cfg.out_dir}")
        else:
            from pathlib import Path

            rows = _diagnose(cfg, args.against)
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            lines = ["metric,value"] + [f"{name},{value:.17g}" for name, value in rows]
            (out / "diagnostics.csv").write_text("\n".join(lines) + "\n")
            for name, value in rows:
                print(f"{name} = {value:.6e}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, DomainError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
