"""Command-line entry point: ``mocco {train,compare,ablate,diag,test-oracles}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive range) or ``"0,3,5"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def parse_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    for flag, key in (("seed", "seed"), ("env", "env_name"), ("agent", "agent_name"), ("mode", "exploration_mode"),
                      ("total_steps", "total_steps"), ("output_dir", "output_dir")):
        v = getattr(args, flag, None)
        if v is not None:
            out[key] = v
    return out


def _config(args, **defaults) -> RunConfig:
    overrides = {**defaults, **_overrides(args)}
    return load_config(args.config, overrides)


def _common(p: argparse.ArgumentParser, with_seed=True):
    p.add_argument("--config", help="flat YAML or JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field (repeatable)")
    p.add_argument("--env", help="point_mass | pendulum_swingup | sparse_mountain_car")
    p.add_argument("--agent", help="td3 | mocco")
    p.add_argument("--total-steps", type=int)
    p.add_argument("--output-dir")
    if with_seed:
        p.add_argument("--seed", type=int)
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mocco", description="Guided exploration and MOCCO at desk scale.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training job")
    _common(p)
    p.add_argument("--mode", help="exploration: none | gaussian (normal) | ou | guided (ge)")

    p = sub.add_parser("compare", help="exploration-mode comparison over seeds")
    _common(p, with_seed=False)
    p.add_argument("--modes", default="none,normal,ou,ge")
    p.add_argument("--seeds", default="0..9")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("ablate", help="sweep one MOCCO hyperparameter over seeds")
    _common(p, with_seed=False)
    p.add_argument("--mode", help="exploration mode for every cell")
    p.add_argument("--param", required=True, help="beta | window | mc_capacity")
    p.add_argument("--values", required=True)
    p.add_argument("--seeds", default="0..4")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("diag", help="train with Q probes, zeta/a_e traces and action-plane surfaces")
    _common(p)
    p.add_argument("--mode")
    p.add_argument("--probe-interval", type=int, default=5000)
    p.add_argument("--resolution", type=int, default=41)

    sub.add_parser("test-oracles", help="print the reference values used by the test suite")
    return parser


def cmd_train(args) -> int:
    from .training import run_training

    cfg = _config(args)
    result = run_training(cfg)
    if not args.no_plots:
        from .plots import plot_run

        plot_run(cfg.output_dir)
    print(f"{result.status}: metrics in {result.metrics_path}")
    print(f"final10_mean={result.final10_mean} first_success_step={result.first_success_step}")
    return 0 if result.status == "ok" else 2


def _print_table(table: list[dict]) -> None:
    if not table:
        return
    keys = list(table[0])
    print("\t".join(keys))
    for row in table:
        print("\t".join("" if row[k] is None else str(row[k]) for k in keys))


def cmd_compare(args) -> int:
    from .compare import run_comparison

    cfg = _config(args, output_dir="runs/compare")
    table = run_comparison(cfg, parse_list(args.modes), parse_seeds(args.seeds), cfg.output_dir,
                           jobs=args.jobs, plot=not args.no_plots)
    _print_table(table)
    print(f"table: {Path(cfg.output_dir) / 'comparison.csv'}")
    return 0


def cmd_ablate(args) -> int:
    from .compare import run_ablation

    cfg = _config(args, agent_name="mocco", output_dir=f"runs/ablate_{args.param}")
    table = run_ablation(cfg, args.param, parse_list(args.values), parse_seeds(args.seeds), cfg.output_dir,
                         jobs=args.jobs, plot=not args.no_plots)
    _print_table(table)
    print(f"table: {Path(cfg.output_dir) / 'comparison.csv'}")
    return 0


def cmd_diag(args) -> int:
    from .training import run_training

    cfg = _config(args, agent_name="mocco", output_dir="runs/diag", probe_interval=args.probe_interval,
                  trace=True, surface_resolution=args.resolution)
    result = run_training(cfg)
    if not args.no_plots:
        from .plots import plot_run

        for p in plot_run(cfg.output_dir):
            print(f"figure: {p}")
    print(f"{result.status}: diagnostics in {cfg.output_dir}")
    return 0 if result.status == "ok" else 2


def cmd_test_oracles(args) -> int:
    from .oracles import report

    for name, value, what in report():
        print(f"{name:<40s} {value:>.10g}   # {what}")
    return 0


COMMANDS = {"train": cmd_train, "compare": cmd_compare, "ablate": cmd_ablate, "diag": cmd_diag,
            "test-oracles": cmd_test_oracles}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (KeyError, ValueError) as exc:
        print(f"mocco: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
