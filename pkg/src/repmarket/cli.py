"""Command line entry point.

    python -m repmarket simulate --config FILE [--engine NAME|all] [--seeds N] [--out DIR]
    python -m repmarket compare --in DIR [DIR ...] [--out FILE]
    python -m repmarket irl fit --traces FILE --out WEIGHTS

Exit status: 0 on success, 1 on configuration errors, 2 when a run finished
but some iterative solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import irl
from .core import GlobalParams
from .reputation import ENGINE_NAMES
from .runner import (ConfigError, ScenarioConfig, collect_reports, compare, comparison_text, load_config,
                     run_all, seeds_from)

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2


def _simulate(args) -> int:
    if args.config:
        settings, params = load_config(args.config)
    else:
        settings, params = {}, GlobalParams()
    engine = args.engine or settings.get("engine", "all")
    engines = list(ENGINE_NAMES) if engine == "all" else [engine]
    seeds = seeds_from(args.seeds) if args.seeds is not None else settings.get("seeds", tuple(range(10)))
    out = args.out or settings.get("out", "results")
    base = ScenarioConfig(engine=engines[0], params=params, seeds=seeds, out_dir=Path(out),
                          irl_weights=settings.get("irl_weights"),
                          write_transactions=bool(settings.get("write_transactions", True)),
                          n_jobs=int(args.jobs or settings.get("n_jobs", 1)))
    for e in engines:
        if e not in ENGINE_NAMES:
            raise ConfigError(f"unknown engine {e!r}; choose from {', '.join(ENGINE_NAMES)}")
    results = run_all(engines, base)
    for e, res in results.items():
        agg = res.aggregate
        print(f"{e:11s} welfare={agg['welfare'][0]:.1f} gini={agg['gini'][0]:.3f} "
              f"success={agg['success_rate'][0]:.3f} pq_slope={agg['pq_slope'][0]:.3f}")
    return EXIT_NONCONVERGED if any(r.warnings for r in results.values()) else EXIT_OK


def _compare(args) -> int:
    rows = compare(collect_reports(args.inputs))
    text = comparison_text(rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _irl_fit(args) -> int:
    try:
        traces = irl.load_traces(args.traces, top_n=args.top_n, max_length=args.max_length)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read traces: {exc}") from exc
    if not traces:
        raise ConfigError(f"{args.traces}: no traces found")
    model = irl.IrlModel(n_buckets=args.buckets, bucket_width=args.bucket_width)
    result = irl.irl_fit(traces, model, learning_rate=args.learning_rate, max_iter=args.max_iter)
    l, o, u = irl.write_weights(args.out, result.action_weights)
    print(f"l={l:.4f} o={o:.4f} u={u:.4f} (iterations={result.iterations}, |grad|={result.grad_norm:.2e})")
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repmarket", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one or all reputation scenarios")
    sim.add_argument("--config", help="key = value parameter file")
    sim.add_argument("--engine", help="engine name or 'all'")
    sim.add_argument("--seeds", type=int, help="number of seeds (0..N-1)")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--jobs", type=int, help="worker processes per engine")
    sim.set_defaults(func=_simulate)

    cmp_ = sub.add_parser("compare", help="tabulate aggregate reports across engines")
    cmp_.add_argument("--in", dest="inputs", nargs="+", required=True)
    cmp_.add_argument("--out", help="also write the table here")
    cmp_.set_defaults(func=_compare)

    irl_p = sub.add_parser("irl", help="inverse reinforcement learning")
    irl_sub = irl_p.add_subparsers(dest="irl_command", required=True)
    fit = irl_sub.add_parser("fit", help="fit action weights from an event log")
    fit.add_argument("--traces", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--top-n", type=int, default=None, help="keep the N most vote-heavy low-creation users")
    fit.add_argument("--max-length", type=int, default=None)
    fit.add_argument("--buckets", type=int, default=10)
    fit.add_argument("--bucket-width", type=int, default=5)
    fit.add_argument("--learning-rate", type=float, default=0.1)
    fit.add_argument("--max-iter", type=int, default=2000)
    fit.set_defaults(func=_irl_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
