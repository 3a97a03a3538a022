"""Command-line surface for the toolkit.

Exit codes: 0 success, 2 configuration error, 3 data/artifact error,
4 scenario infeasible, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baselines import MethodSpec, build_monitor
from .config import ExperimentConfig, load_config
from .conformal import load_monitor, save_monitor
from .datasets import collect_dataset, load_bundle, save_bundle
from .errors import ConfigurationError, DataError, ScenarioInfeasibleError
from .harness import (
    evaluate_monitor,
    generate_test_pool,
    run_experiment,
    scenario_health,
    write_results_csv,
)
from .predictor import fit_least_squares

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
        config.validate()
    return config


def cmd_collect(args) -> int:
    config = _load(args)
    n = args.n_unsafe if args.n_unsafe is not None else config.n_unsafe
    bundle = collect_dataset(config, n, config.master_seed)
    save_bundle(bundle, args.output)
    meta = bundle.metadata
    print(f"collected {meta['n_unsafe']} unsafe / {meta['n_safe_trajectories']} safe "
          f"trajectories in {meta['n_rollouts']} rollouts "
          f"({meta['n_too_early']} too-early resamples) -> {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load(args)
    bundle = load_bundle(args.bundle)
    predictor = None
    if args.method in ("full", "pred_ny"):
        predictor = fit_least_squares(bundle.safe_matrix(), bundle.regression_targets)
    spec = MethodSpec(name=args.method, pca_dims=config.pca_dims)
    monitor = build_monitor(spec, bundle, predictor)
    save_monitor(monitor, args.output)
    print(f"trained {args.method} monitor (N={monitor.n_calibration}) -> {args.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load(args)
    monitor = load_monitor(args.artifact)
    pool = generate_test_pool(config, config.master_seed,
                              count=args.trajectories or config.test_trajectories)
    rows, info = evaluate_monitor(monitor, pool, config.epsilon_grid)
    write_results_csv(rows, args.output)
    print(f"evaluated {len(pool)} trajectories "
          f"({info['excluded']} excluded) -> {args.output}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = _load(args)
    result = run_experiment(config, output_dir=args.output_dir)
    print(f"{len(result.rows)} result rows -> {Path(args.output_dir) / 'results.csv'}")
    for entry in result.summary:
        print(f"  {entry['method']:>10s} eps={entry['epsilon']:<5g} "
              f"miss={entry['mean_miss_rate']:.3f} power={entry['mean_power']:.3f}")
    return EXIT_OK


def cmd_health(args) -> int:
    config = _load(args)
    report = scenario_health(config, sample_size=args.samples)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app_from_files

    config = _load(args)
    app = app_from_files(args.artifact, config)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plots import plot_results

    created = plot_results(args.results, args.output_dir, fmt=args.format)
    for path in created:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aeromon",
        description="Conformal nearest-neighbor safety monitoring for simulated flight maneuvers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="YAML config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's master seed")

    p = sub.add_parser("collect", help="collect a dataset bundle")
    add_common(p)
    p.add_argument("--n-unsafe", type=int, default=None)
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train a monitor artifact from a bundle")
    add_common(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--method", default="full",
                   choices=["full", "no_pred", "pca", "current_ny", "pred_ny"])
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a monitor on fresh trajectories")
    add_common(p)
    p.add_argument("--artifact", type=Path, required=True)
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="full sweep: fits x methods x epsilon grid")
    add_common(p)
    p.add_argument("--output-dir", type=Path, required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("health", help="check the scenario's unsafe fraction")
    add_common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_health)

    p = sub.add_parser("serve", help="launch the live monitoring service")
    add_common(p)
    p.add_argument("--artifact", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("plot", help="render result panels from a results table")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--output-dir", type=Path, required=True)
    p.add_argument("--format", default="svg", choices=["svg", "pdf", "png"])
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ScenarioInfeasibleError as err:
        print(f"scenario infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as err:
        print(f"missing file: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
