"""Command-line interface.

Subcommands: ``plan`` dumps the dynamic-programming ground-truth table,
``run`` executes one configured batch, ``sweep`` runs an (agents x modes)
grid, ``table1`` computes conflict/conflict-free area ratios from a sweep,
and ``plots`` re-renders SVG charts from previously written CSVs.

Exit codes: 0 success, 1 configuration error, 2 runtime error. Worker count
defaults to the GRIDBANDIT_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from ._version import __version__
from .gridworld import ACTIONS, GridSpec
from .harness import (
    MODE_ORDER,
    ConfigError,
    ExperimentConfig,
    load_config,
    read_csv,
    run_batch,
    run_sweep,
    write_planner_csv,
)
from .multiagent import Conflict, Mode, Policy
from .planner import value_iteration


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_agents(text: str) -> list[int]:
    """Agent counts: '40', '10,50,90', or 'start..stop:step' like '10..100:10'."""
    if ".." in text:
        span, _, step = text.partition(":")
        lo, _, hi = span.partition("..")
        if not (lo and hi and step):
            raise ConfigError(f"bad agents range '{text}', expected start..stop:step")
        values = list(range(int(lo), int(hi) + 1, int(step)))
    else:
        values = [int(v) for v in text.split(",") if v]
    if not values:
        raise ConfigError(f"no agent counts in '{text}'")
    return values


def _parse_modes(text: str) -> list[Mode]:
    """Mode list: 'all' or comma-separated 'policy/conflict' like 'bandit/free'."""
    if text == "all":
        return list(MODE_ORDER)
    modes = []
    for part in text.split(","):
        policy, _, conflict = part.partition("/")
        try:
            modes.append(Mode(Policy(policy), Conflict(conflict)))
        except ValueError:
            raise ConfigError(
                f"bad mode '{part}', expected policy/conflict with policy in "
                f"{[p.value for p in Policy]} and conflict in {[c.value for c in Conflict]}"
            ) from None
    return modes


def _build_parser() -> _Parser:
    parser = _Parser(prog="gridbandit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="dump the ground-truth action-value table as CSV")
    p_plan.add_argument("--config", type=Path, help="take grid and gamma from this config")
    p_plan.add_argument("--gamma", type=float, default=None)
    p_plan.add_argument("--tol", type=float, default=1e-10)
    p_plan.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    p_run = sub.add_parser("run", help="run one configured batch")
    p_run.add_argument("--config", type=Path, required=True)
    p_run.add_argument("--seed", type=int, help="override master_seed")
    p_run.add_argument("--out", type=Path, help="override output_dir")
    p_run.add_argument("--workers", type=int)

    p_sweep = sub.add_parser("sweep", help="run an (agents x modes) grid")
    p_sweep.add_argument("--config", type=Path, required=True)
    p_sweep.add_argument("--agents", default="10..100:10")
    p_sweep.add_argument("--modes", default="all")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out", type=Path, help="override output_dir")
    p_sweep.add_argument("--workers", type=int)

    p_t1 = sub.add_parser("table1", help="area ratios from a finished sweep")
    p_t1.add_argument("--from", dest="source", type=Path, required=True)
    p_t1.add_argument("--out", type=Path)

    p_plots = sub.add_parser("plots", help="re-render SVG charts from CSVs")
    p_plots.add_argument("--from", dest="source", type=Path, required=True)
    return parser


def _cmd_plan(args) -> int:
    if args.config:
        config = load_config(args.config)
        spec, gamma = config.grid, config.gamma
    else:
        spec, gamma = GridSpec(), 0.9
    if args.gamma is not None:
        gamma = args.gamma
    optimal = value_iteration(spec, gamma, tol=args.tol)
    if args.out:
        path = write_planner_csv(optimal, spec, args.out)
        print(f"wrote {path} (residual {optimal.residual:.3e})")
    else:
        sys.stdout.write("# schema: gridbandit.qstar.v1\nrow,col,action,q_value\n")
        for si in range(spec.n_states):
            s = spec.state_at(si)
            for a in ACTIONS:
                sys.stdout.write(f"{s.row},{s.col},{a.name.lower()},{float(optimal.values[si, a])}\n")
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    series, manifest = run_batch(config, workers=args.workers)
    print(f"wrote {config.output_dir} (s_under {series.s_under:.2f}, "
          f"{manifest.duration_seconds:.1f}s, {len(manifest.files)} files)")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    out = args.out if args.out is not None else config.output_dir
    results = run_sweep(config, _parse_agents(args.agents), _parse_modes(args.modes),
                        out, workers=args.workers)
    print(f"wrote {out} ({len(results)} runs)")
    return 0


def _cmd_table1(args) -> int:
    import csv as _csv

    src = Path(args.source)
    summary = src / "summary.csv"
    if not summary.is_file():
        raise ConfigError(f"no summary.csv under {src}; run 'gridbandit sweep' first")
    _, header, rows = read_csv(summary)
    idx = {name: header.index(name) for name in ("policy", "conflict", "n_agents", "s_under")}
    groups: dict[tuple[str, int], dict[str, float]] = {}
    for row in rows:
        key = (row[idx["policy"]], int(row[idx["n_agents"]]))
        groups.setdefault(key, {})[row[idx["conflict"]]] = float(row[idx["s_under"]])
    out = args.out if args.out is not None else src / "table1.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        f.write("# schema: gridbandit.table1.v1\n")
        writer = _csv.writer(f)
        writer.writerow(("policy", "n_agents", "ratio"))
        for (policy, n), variants in sorted(groups.items()):
            if set(variants) != {"allowed", "free"}:
                raise ConfigError(f"policy={policy} N={n}: need both conflict variants")
            writer.writerow((policy, n, variants["allowed"] / variants["free"]))
    print(f"wrote {out}")
    return 0


def _render_run_dir(src: Path) -> list[Path]:
    made = []
    _, _, rows = read_csv(src / "loss.csv")
    t = np.array([int(r[0]) for r in rows])
    made.append(plots.render_loss({src.name: (t, np.array([float(r[1]) for r in rows]))},
                                  src / "loss.svg"))
    _, _, rows = read_csv(src / "valid_rate.csv")
    made.append(plots.render_valid_rate(
        {src.name: (np.array([int(r[0]) for r in rows]),
                    np.array([float(r[1]) for r in rows]))},
        src / "valid_rate.svg"))
    _, _, rows = read_csv(src / "histogram.csv")
    counts = np.array([int(r[3]) for r in rows])
    n_states = counts.size // len(ACTIONS)
    side = int(round(n_states ** 0.5)) or 1
    spec_like = GridSpec(height=max(1, n_states // side), width=side, specials=())
    made.append(plots.render_histogram(counts.reshape(n_states, len(ACTIONS)),
                                       spec_like, src / "histogram.svg"))
    return made


def _cmd_plots(args) -> int:
    src = Path(args.source)
    made = []
    if (src / "summary.csv").is_file():
        for child in sorted(p for p in src.iterdir() if (p / "loss.csv").is_file()):
            made.extend(_render_run_dir(child))
    elif (src / "loss.csv").is_file():
        made.extend(_render_run_dir(src))
    else:
        raise ConfigError(f"nothing to render under {src}: no loss.csv or summary.csv")
    print(f"rendered {len(made)} charts under {src}")
    return 0


_COMMANDS = {
    "plan": _cmd_plan,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "table1": _cmd_table1,
    "plots": _cmd_plots,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
