"""Experiment runner: configuration files, trial orchestration, artifact emission.

A run writes delimited data (CSV with a schema id in the first line) plus the
SVG charts rendered from it, and a JSON manifest listing every emitted file
with its content hash. Given the same master seed, CSV bytes are identical
across repeat runs and worker counts; trials are the unit of parallelism and
each derives its own labeled random streams.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import plots
from ._version import __version__
from .gridworld import ACTIONS, Action, GridSpec, SpecialCell, State
from .metrics import MetricsSeries, aggregate_trials
from .multiagent import Conflict, Mode, Policy, run_trial, trial_seed
from .policies import Schedules


class ConfigError(ValueError):
    """Raised for unparsable, unknown, or invariant-violating configuration."""


MODE_ORDER = (
    Mode(Policy.UNIFORM, Conflict.ALLOWED),
    Mode(Policy.BANDIT, Conflict.ALLOWED),
    Mode(Policy.UNIFORM, Conflict.FREE),
    Mode(Policy.BANDIT, Conflict.FREE),
)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    gamma: float = 0.9
    schedules: Schedules = field(default_factory=Schedules)
    n_agents: int = 10
    mode: Mode = Mode(Policy.BANDIT, Conflict.FREE)
    trials: int = 100
    master_seed: int = 0
    output_dir: Path = Path("out")
    epsilon: float = 0.1  # classic per-state baseline only; unused by the engine

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma={self.gamma} outside [0, 1)")
        if not 1 <= self.n_agents <= self.grid.n_pairs:
            raise ValueError(
                f"n_agents={self.n_agents} outside [1, {self.grid.n_pairs}] "
                f"for a {self.grid.height}x{self.grid.width} grid")
        if self.trials < 1:
            raise ValueError(f"trials={self.trials} must be at least 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon={self.epsilon} outside [0, 1]")
        object.__setattr__(self, "output_dir", Path(self.output_dir))


def mode_label(mode: Mode, n_agents: int | None = None) -> str:
    base = f"{mode.policy.value}/{'conflict-free' if mode.conflict is Conflict.FREE else 'conflict'}"
    return base if n_agents is None else f"{base} N={n_agents}"


# --- configuration files ---------------------------------------------------

def _reject_unknown(data: dict, allowed: set[str], context: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}' in {context}")


def _state_from_json(value, context: str) -> State:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{context} must be a [row, col] pair")
    return State(int(value[0]), int(value[1]))


def _grid_from_json(data: dict) -> GridSpec:
    _reject_unknown(data, {"height", "width", "specials", "wall_penalty", "step_reward"}, "grid")
    kwargs = {}
    for key in ("height", "width"):
        if key in data:
            kwargs[key] = int(data[key])
    for key in ("wall_penalty", "step_reward"):
        if key in data:
            kwargs[key] = float(data[key])
    if "specials" in data:
        cells = []
        for i, entry in enumerate(data["specials"]):
            ctx = f"grid.specials[{i}]"
            _reject_unknown(entry, {"source", "destination", "reward", "success_prob"}, ctx)
            cells.append(SpecialCell(
                source=_state_from_json(entry["source"], f"{ctx}.source"),
                destination=_state_from_json(entry["destination"], f"{ctx}.destination"),
                reward=float(entry["reward"]),
                success_prob=float(entry.get("success_prob", 0.5)),
            ))
        kwargs["specials"] = tuple(cells)
    return GridSpec(**kwargs)


def _schedules_from_json(data: dict) -> Schedules:
    _reject_unknown(data, {"alpha0", "alpha_final", "beta0", "beta_final", "horizon"}, "schedules")
    kwargs = {k: float(v) for k, v in data.items() if k != "horizon"}
    if "horizon" in data:
        kwargs["horizon"] = int(data["horizon"])
    return Schedules(**kwargs)


def _mode_from_json(data: dict) -> Mode:
    _reject_unknown(data, {"policy", "conflict"}, "mode")
    try:
        policy = Policy(data["policy"])
    except (KeyError, ValueError):
        raise ConfigError(f"mode.policy must be one of {[p.value for p in Policy]}") from None
    try:
        conflict = Conflict(data["conflict"])
    except (KeyError, ValueError):
        raise ConfigError(f"mode.conflict must be one of {[c.value for c in Conflict]}") from None
    return Mode(policy, conflict)


def config_from_dict(data: dict) -> ExperimentConfig:
    _reject_unknown(data, {"grid", "gamma", "schedules", "n_agents", "mode", "trials",
                           "master_seed", "output_dir", "epsilon"}, "config")
    for key in ("n_agents", "mode"):
        if key not in data:
            raise ConfigError(f"missing required key '{key}'")
    kwargs = {
        "n_agents": int(data["n_agents"]),
        "mode": _mode_from_json(data["mode"]),
    }
    if "grid" in data:
        kwargs["grid"] = _grid_from_json(data["grid"])
    if "schedules" in data:
        kwargs["schedules"] = _schedules_from_json(data["schedules"])
    for key, conv in (("gamma", float), ("trials", int), ("master_seed", int),
                      ("epsilon", float)):
        if key in data:
            kwargs[key] = conv(data[key])
    if "output_dir" in data:
        kwargs["output_dir"] = Path(data["output_dir"])
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "grid": {
            "height": config.grid.height,
            "width": config.grid.width,
            "specials": [
                {
                    "source": [c.source.row, c.source.col],
                    "destination": [c.destination.row, c.destination.col],
                    "reward": c.reward,
                    "success_prob": c.success_prob,
                }
                for c in config.grid.specials
            ],
            "wall_penalty": config.grid.wall_penalty,
            "step_reward": config.grid.step_reward,
        },
        "gamma": config.gamma,
        "schedules": {
            "alpha0": config.schedules.alpha0,
            "alpha_final": config.schedules.alpha_final,
            "beta0": config.schedules.beta0,
            "beta_final": config.schedules.beta_final,
            "horizon": config.schedules.horizon,
        },
        "n_agents": config.n_agents,
        "mode": {"policy": config.mode.policy.value, "conflict": config.mode.conflict.value},
        "trials": config.trials,
        "master_seed": config.master_seed,
        "output_dir": str(config.output_dir),
        "epsilon": config.epsilon,
    }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(data)


def save_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_to_dict(config), indent=2) + "\n")
    return path


def config_digest(config: ExperimentConfig) -> str:
    """Short content hash of the experimental parameters (output location excluded)."""
    data = config_to_dict(config)
    del data["output_dir"]
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:12]


# --- trial orchestration ----------------------------------------------------

def resolve_workers(explicit: int | None = None) -> int:
    """Worker-count policy: explicit argument, else GRIDBANDIT_WORKERS, else 1."""
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("GRIDBANDIT_WORKERS", "")
    return max(1, int(env)) if env else 1


def _trial_task(args):
    config, index = args
    return run_trial(config, trial_seed(config.master_seed, index))


def batch_series(config: ExperimentConfig, workers: int | None = None) -> MetricsSeries:
    """Run ``config.trials`` independent trials and aggregate them.

    The result is independent of the worker count: trial i always uses the
    seed split (master_seed, i) and aggregation preserves trial order.
    """
    n_workers = resolve_workers(workers)
    tasks = [(config, i) for i in range(config.trials)]
    if n_workers == 1 or config.trials == 1:
        records = [_trial_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_trial_task, tasks))
    return aggregate_trials(records)


# --- delimited artifacts -----------------------------------------------------

def _write_csv(path: Path, schema: str, header: tuple, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# schema: {schema}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """Read back a schema-tagged CSV: (schema id, header, data rows as strings)."""
    with open(path, newline="") as f:
        first = f.readline().strip()
        schema = first.removeprefix("# schema:").strip() if first.startswith("#") else ""
        reader = csv.reader(f)
        header = next(reader)
        return schema, header, [row for row in reader if row]


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_planner_csv(optimal_q, spec: GridSpec, path) -> Path:
    rows = []
    for si in range(spec.n_states):
        s = spec.state_at(si)
        for a in ACTIONS:
            rows.append((s.row, s.col, a.name.lower(), float(optimal_q.values[si, a])))
    return _write_csv(Path(path), "gridbandit.qstar.v1",
                      ("row", "col", "action", "q_value"), rows)


def emit_plots(series: MetricsSeries, output_dir, spec: GridSpec, digest: str = "",
               label: str = "") -> list[Path]:
    """Write the report bundle for one run: loss, valid-rate, and histogram CSVs
    with the SVG charts rendered from them."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = np.arange(1, series.loss.shape[0] + 1)
    files = [
        _write_csv(out / "loss.csv", "gridbandit.loss.v1", ("t", "mean_loss", "stderr"),
                   ((int(ti), float(m), float(se))
                    for ti, m, se in zip(t, series.loss, series.loss_stderr))),
        _write_csv(out / "valid_rate.csv", "gridbandit.valid_rate.v1",
                   ("t", "mean_rate", "stderr"),
                   ((int(ti), float(m), float(se))
                    for ti, m, se in zip(t, series.valid_rate, series.valid_rate_stderr))),
        _write_csv(out / "histogram.csv", "gridbandit.histogram.v1",
                   ("row", "col", "action", "count"),
                   ((spec.state_at(si).row, spec.state_at(si).col, a.name.lower(),
                     int(series.final_histogram[si, a]))
                    for si in range(spec.n_states) for a in ACTIONS)),
    ]
    name = label or "run"
    files.append(plots.render_loss({name: (t, series.loss)}, out / "loss.svg", digest))
    files.append(plots.render_valid_rate({name: (t, series.valid_rate)},
                                         out / "valid_rate.svg", digest))
    files.append(plots.render_histogram(series.final_histogram, spec,
                                        out / "histogram.svg", digest))
    return files


# --- manifests ----------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    per_trial_seeds: list
    version: str
    duration_seconds: float
    s_under: float
    files: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_trial_seeds": self.per_trial_seeds,
            "version": self.version,
            "duration_seconds": self.duration_seconds,
            "s_under": self.s_under,
            "files": self.files,
        }


def _seed_records(config: ExperimentConfig) -> list:
    return [{"trial": i, "entropy": config.master_seed, "spawn_key": [i]}
            for i in range(config.trials)]


def run_batch(config: ExperimentConfig, workers: int | None = None
              ) -> tuple[MetricsSeries, RunManifest]:
    """Run the configured batch, write its artifacts, and return the manifest."""
    start = time.time()
    series = batch_series(config, workers)
    out = Path(config.output_dir)
    files = emit_plots(series, out, config.grid, digest=config_digest(config),
                       label=mode_label(config.mode, config.n_agents))
    manifest = RunManifest(
        config=config_to_dict(config),
        per_trial_seeds=_seed_records(config),
        version=__version__,
        duration_seconds=round(time.time() - start, 3),
        s_under=series.s_under,
        files={f.name: _sha256(f) for f in sorted(files)},
    )
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return series, manifest


# --- sweeps and the conflict-avoidance ratio table ----------------------------

def _strip_varying(config: ExperimentConfig) -> tuple:
    """Config identity ignoring conflict mode and artifact location."""
    data = config_to_dict(config)
    del data["output_dir"]
    data["mode"] = data["mode"]["policy"]
    return json.dumps(data, sort_keys=True)


def emit_table1(runs, path) -> list[tuple[str, int, float]]:
    """Area-ratio table: S_under(conflict) / S_under(conflict-free) per (policy, N).

    ``runs`` yields (config, series) pairs; each (policy, n_agents) group must
    contain both conflict variants of otherwise-identical configs.
    """
    groups: dict[tuple[str, int], dict[Conflict, tuple]] = {}
    for config, series in runs:
        key = (config.mode.policy.value, config.n_agents)
        groups.setdefault(key, {})[config.mode.conflict] = (config, series)
    rows = []
    for (policy, n), variants in sorted(groups.items()):
        if set(variants) != {Conflict.ALLOWED, Conflict.FREE}:
            raise ValueError(f"policy={policy} N={n}: need both conflict variants")
        cfg_a, series_a = variants[Conflict.ALLOWED]
        cfg_f, series_f = variants[Conflict.FREE]
        if _strip_varying(cfg_a) != _strip_varying(cfg_f):
            raise ValueError(f"policy={policy} N={n}: configs differ beyond conflict mode")
        rows.append((policy, n, series_a.s_under / series_f.s_under))
    _write_csv(Path(path), "gridbandit.table1.v1", ("policy", "n_agents", "ratio"), rows)
    return rows


def sweep_subdir(mode: Mode, n_agents: int) -> str:
    return f"{mode.policy.value}_{mode.conflict.value}_N{n_agents:03d}"


def run_sweep(base: ExperimentConfig, agent_values, modes, out_dir,
              workers: int | None = None) -> list[tuple[ExperimentConfig, MetricsSeries]]:
    """Run the (n_agents x mode) grid, one run directory per cell, plus summary
    CSV, combined charts, and the ratio table when both conflict modes are present."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.time()
    results = []
    for n in agent_values:
        for mode in modes:
            cfg = replace(base, n_agents=n, mode=mode,
                          output_dir=out / sweep_subdir(mode, n))
            series, _ = run_batch(cfg, workers)
            results.append((cfg, series))

    files = [_write_csv(
        out / "summary.csv", "gridbandit.summary.v1",
        ("policy", "conflict", "n_agents", "s_under", "valid_rate_trailing", "valid_rate_mean"),
        ((c.mode.policy.value, c.mode.conflict.value, c.n_agents, float(s.s_under),
          float(s.valid_rate_trailing), float(s.valid_rate.mean()))
         for c, s in results))]
    files.extend(_sweep_charts(results, out))

    by_key = {}
    for cfg, series in results:
        by_key.setdefault((cfg.mode.policy, cfg.n_agents), set()).add(cfg.mode.conflict)
    if all(v == {Conflict.ALLOWED, Conflict.FREE} for v in by_key.values()) and by_key:
        emit_table1(results, out / "table1.csv")
        files.append(out / "table1.csv")

    manifest = RunManifest(
        config=config_to_dict(base),
        per_trial_seeds=_seed_records(base),
        version=__version__,
        duration_seconds=round(time.time() - start, 3),
        s_under=float("nan"),
        files={str(f.relative_to(out)): _sha256(f) for f in sorted(files)},
    )
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return results


def _sweep_charts(results, out: Path) -> list[Path]:
    files = []
    digest = ""
    by_n: dict[int, dict[str, tuple]] = {}
    for cfg, series in results:
        t = np.arange(1, series.loss.shape[0] + 1)
        by_n.setdefault(cfg.n_agents, {})[mode_label(cfg.mode)] = (t, series.loss)
    for n, curves in sorted(by_n.items()):
        files.append(plots.render_loss(curves, out / f"loss_N{n:03d}.svg", digest))
    by_mode: dict[str, list[tuple[int, float]]] = {}
    for cfg, series in results:
        by_mode.setdefault(mode_label(cfg.mode), []).append(
            (cfg.n_agents, series.valid_rate_trailing))
    rate_series = {}
    for label, points in by_mode.items():
        arr = np.array(sorted(points), dtype=float).T
        rate_series[label] = (arr[0], arr[1])
    files.append(plots.render_valid_rate(rate_series, out / "valid_rate_vs_agents.svg",
                                         digest, xlabel="number of agents"))
    return files
