"""Run reputation scenarios over several seeds and compare them.

Output layout under ``out_dir``::

    <engine>/report.txt            per-indicator mean and std over seeds
    <engine>/series_quality.csv    20-step window means, averaged over seeds
    <engine>/series_revenue.csv
    <engine>/seed_<n>/report.txt   the same files for a single seed
    <engine>/seed_<n>/series_*.csv
    <engine>/seed_<n>/transactions.log
    comparison.csv                 written when several engines ran
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import GlobalParams, params_from_mapping, read_key_values
from .irl import read_lou
from .market import World
from .metrics import HEADLINE, INDICATORS, ScenarioReport, aggregate, scenario_report
from .reputation import ENGINE_NAMES

logger = logging.getLogger(__name__)

RUNNER_KEYS = {"engine", "seeds", "out", "irl_weights", "write_transactions", "n_jobs"}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    engine: str = "betapt"
    params: GlobalParams = field(default_factory=GlobalParams)
    seeds: tuple = tuple(range(10))
    out_dir: Path | None = None
    irl_weights: Path | None = None
    write_transactions: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.engine not in ENGINE_NAMES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {', '.join(ENGINE_NAMES)}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
        if self.irl_weights is not None:
            self.irl_weights = Path(self.irl_weights)

    def resolved_params(self) -> GlobalParams:
        if self.irl_weights is None:
            return self.params
        try:
            return self.params.replace(**read_lou(self.irl_weights))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot use IRL weights: {exc}") from exc


def seeds_from(value) -> tuple:
    if isinstance(value, int):
        return tuple(range(value))
    return tuple(value)


def load_config(path: str | Path) -> tuple[dict, GlobalParams]:
    """Split a ``key = value`` file into runner settings and simulation parameters."""
    try:
        values = read_key_values(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    runner = {k: values.pop(k) for k in list(values) if k in RUNNER_KEYS}
    try:
        params = params_from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if "seeds" in runner:
        runner["seeds"] = seeds_from(runner["seeds"])
    return runner, params


@dataclass
class SeedResult:
    report: ScenarioReport
    warnings: int = 0


def run_seed(params: GlobalParams, engine: str, seed: int, out_dir: Path | None = None,
             write_transactions: bool = True) -> SeedResult:
    world = World(params, engine, seed).run()
    posted = [r.posted_quality for r in world.reports]
    report = scenario_report(world.log, world.ledger, params, world.step, engine, seed, posted)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(report.to_text())
        write_series(out_dir / "series_quality.csv", report.series_quality, world.step)
        write_series(out_dir / "series_revenue.csv", report.series_revenue, world.step)
        if write_transactions:
            world.log.write(out_dir / "transactions.log")
    return SeedResult(report, getattr(world.engine, "nonconverged", 0))


def _run_seed_args(args):
    return run_seed(*args)


def write_series(path: Path, values, n_steps: int, window: int = 20) -> None:
    """One ``step,value`` row per window, keyed by the window's last step."""
    lines = ["step,value"]
    for i, v in enumerate(np.asarray(values, dtype=float)):
        lines.append(f"{min((i + 1) * window, n_steps)},{v!r}")
    path.write_text("\n".join(lines) + "\n")


def _mean_series(series) -> np.ndarray:
    """Element-wise mean over seeds; windows with no trades in any seed stay NaN."""
    stacked = np.vstack(series) if series and len(series[0]) else np.zeros((1, 0))
    count = np.sum(~np.isnan(stacked), axis=0)
    total = np.nansum(stacked, axis=0)
    return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def aggregate_text(engine: str, seeds: Sequence[int], agg: Mapping[str, tuple[float, float]]) -> str:
    lines = [f"engine = {engine}", f"seeds = {list(seeds)!r}"]
    for key in INDICATORS:
        mean, std = agg[key]
        lines.append(f"{key} = {mean!r}")
        lines.append(f"{key}_std = {std!r}")
    return "\n".join(lines) + "\n"


@dataclass
class ScenarioResult:
    engine: str
    reports: list
    aggregate: dict
    warnings: int = 0


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    params = config.resolved_params()
    engine_dir = None if config.out_dir is None else config.out_dir / config.engine
    if engine_dir is not None:
        try:
            engine_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {engine_dir}: {exc}") from exc
    jobs = [(params, config.engine, s, None if engine_dir is None else engine_dir / f"seed_{s}",
             config.write_transactions) for s in config.seeds]
    if config.n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(_run_seed_args, jobs))
    else:
        results = [_run_seed_args(j) for j in jobs]
    reports = [r.report for r in results]
    agg = aggregate(reports)
    if engine_dir is not None:
        (engine_dir / "report.txt").write_text(aggregate_text(config.engine, config.seeds, agg))
        for name in ("series_quality", "series_revenue"):
            write_series(engine_dir / f"{name}.csv", _mean_series([getattr(r, name) for r in reports]),
                         params.n_steps)
    return ScenarioResult(config.engine, reports, agg, sum(r.warnings for r in results))


def run_all(engines: Iterable[str], base: ScenarioConfig) -> dict[str, ScenarioResult]:
    """Run several engines on identical seeds and parameters."""
    results = {}
    for engine in engines:
        results[engine] = run_scenario(dataclasses.replace(base, engine=engine))
    if base.out_dir is not None and len(results) > 1:
        write_comparison(base.out_dir / "comparison.csv",
                         compare({e: r.aggregate for e, r in results.items()}))
    return results


# -- comparison -----------------------------------------------------------------

def _mean(value):
    return value[0] if isinstance(value, tuple) else value


def compare(aggregates: Mapping[str, Mapping]) -> list[dict]:
    """One row per engine with every indicator and its rank (1 = largest)."""
    engines = list(aggregates)
    rows = [{"engine": e, **{k: float(_mean(aggregates[e][k])) for k in INDICATORS}} for e in engines]
    for key in HEADLINE + ("pq_slope",):
        vals = np.array([r[key] for r in rows])
        order = np.argsort(-np.where(np.isnan(vals), -np.inf, vals), kind="stable")
        ranks = np.empty(len(rows), dtype=int)
        ranks[order] = np.arange(1, len(rows) + 1)
        for r, rank in zip(rows, ranks):
            r[f"{key}_rank"] = int(rank) if not math.isnan(r[key]) else None
    return rows


def comparison_columns() -> list[str]:
    cols = ["engine"]
    for key in INDICATORS:
        cols.append(key)
        if key != "pq_intercept":
            cols.append(f"{key}_rank")
    return cols


def comparison_text(rows: list[dict]) -> str:
    cols = comparison_columns()
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r[c] is None else (r[c] if isinstance(r[c], str) else repr(r[c]))
                              for c in cols))
    return "\n".join(lines) + "\n"


def write_comparison(path: Path, rows: list[dict]) -> None:
    path.write_text(comparison_text(rows))


def read_aggregate(path: str | Path) -> tuple[str, dict]:
    values = read_key_values(path)
    engine = str(values.get("engine", Path(path).parent.name))
    agg = {}
    for key in INDICATORS:
        if key not in values:
            raise ConfigError(f"{path}: missing indicator {key}")
        agg[key] = (float(values[key]), float(values.get(f"{key}_std", math.nan)))
    return engine, agg


def collect_reports(dirs: Iterable[str | Path]) -> dict[str, dict]:
    """Find aggregate ``report.txt`` files in engine directories or their parents."""
    found = {}
    for d in map(Path, dirs):
        candidates = [d / "report.txt"] if (d / "report.txt").exists() else sorted(d.glob("*/report.txt"))
        if not candidates:
            raise ConfigError(f"no report.txt found under {d}")
        for path in candidates:
            engine, agg = read_aggregate(path)
            found[engine] = agg
    return found
