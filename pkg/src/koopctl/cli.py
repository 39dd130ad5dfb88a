"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dmd, dynamics, harness, plots
from .errors import ConfigError, KoopctlError, NumericError, UsageError
from .policy import load_checkpoint, save_checkpoint
from .train import episode_seeds, run_episodes

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _config(args, fallback=None):
    if getattr(args, "config", None):
        flat = harness.load_config_file(args.config)
    elif fallback is not None and Path(fallback).is_file():
        flat = harness.load_config_file(fallback)
    else:
        flat = {}
    flat.pop("config_hash", None)
    overrides = harness.parse_overrides(getattr(args, "set", None))
    for key in ("system", "method", "seed", "output_dir"):
        val = getattr(args, key.replace(".", "_"), None)
        if val is not None:
            overrides[key] = val
    return harness.resolve(flat, overrides)


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    cfg = _config(args)
    if args.checkpoint:
        policy, _ = load_checkpoint(args.checkpoint)
        seeds = episode_seeds(cfg.seed, harness.EVAL_STREAM, 0, 1)
        Y, _, u = run_episodes(cfg.spec, policy.controller(training=False), args.T, seeds)
        traj = dynamics.Trajectory(Y[0], u[0])
    else:
        traj = dynamics.rollout_random(cfg.spec, args.T, cfg.seed)
    _emit(dynamics.trajectory_to_csv(traj), args.out)
    if args.svg:
        Path(args.svg).write_text(plots.trajectory_svg(traj, title=cfg.spec.kind))
    return 0


def cmd_dmd(args):
    traj = dynamics.trajectory_from_csv(args.csv)
    vals = dmd.estimate_eigs(traj, dmd.HankelConfig(args.tau, args.rank))
    _emit(json.dumps(dmd.eigs_to_json(vals), indent=2) + "\n", args.out)
    return 0


def _train_one(args, method):
    cfg = harness.resolve(_config(args).flat, {"method": method})
    out = Path(args.out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.jsonl" if method in ("ours", "rl") else None
    policy, info = harness.build_policy(cfg, 0, log_path)
    save_checkpoint(policy, out / "checkpoint.json", cfg.spec.kind, cfg.config_hash)
    (out / "config.json").write_text(harness.snapshot(cfg))
    if info.get("sn_loss"):
        (out / "sn_loss.json").write_text(json.dumps(info["sn_loss"]) + "\n")
    print(json.dumps({"checkpoint": str(out / "checkpoint.json"), "config_hash": cfg.config_hash}))
    return 0


def cmd_train(args):
    return _train_one(args, "ours")


def cmd_baseline(args):
    return _train_one(args, args.method)


def cmd_evaluate(args):
    # a checkpoint written by `train`/`baseline` sits next to its config snapshot
    cfg = _config(args, fallback=Path(args.checkpoint).parent / "config.json")
    policy, doc = load_checkpoint(args.checkpoint)
    if doc.get("kind") != "mlp" and doc.get("system") and doc["system"] != cfg.spec.kind:
        raise ConfigError(f"checkpoint is for system {doc['system']!r}, config has {cfg.spec.kind!r}")
    report = harness.evaluate_checkpoint(cfg, policy, doc)
    _emit(harness.dumps_report(report), args.out)
    return 0


def cmd_run(args):
    cfg = _config(args)
    report = harness.run_experiment(cfg, dry_run=args.dry_run)
    if report is None:
        print(json.dumps({"valid": True, "config_hash": cfg.config_hash}))
    else:
        print(json.dumps({"output_dir": str(cfg.output_dir), "mean_error": report["mean_error"],
                          "stderr": report["stderr"]}))
    return 0


def _collect_reports(paths):
    reports = []
    for p in paths:
        p = Path(p)
        files = sorted(p.rglob("report.json")) if p.is_dir() else [p]
        for f in files:
            reports.append(json.loads(f.read_text()))
    if not reports:
        raise UsageError("no report.json files found")
    return reports


def cmd_report(args):
    rows = harness.summary_rows(_collect_reports(args.inputs))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)

    def fmt(v):
        return "n/a" if v is None else f"{v:.3f}"

    print("| system | abs | arg | method | error |")
    print("|---|---|---|---|---|")
    for r in rows:
        print(f"| {r['system']} | {r['abs']:.2f} | {r['arg']:.1f} | {r['method']} | "
              f"{fmt(r['mean_error'])} ± {fmt(r['stderr'])} |")
    return 0


def _add_config_args(p):
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override")
    p.add_argument("--system", help="vdp, fhn, duffing or rossler")
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="koopctl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a trajectory CSV (random control or a checkpoint)")
    _add_config_args(p)
    p.add_argument("--T", type=int, default=200)
    p.add_argument("--checkpoint")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--svg", help="also write an SVG plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dmd", help="Hankel-DMD eigenvalues of a trajectory CSV")
    p.add_argument("csv")
    p.add_argument("--tau", type=int, default=5)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dmd)

    p = sub.add_parser("train", help="SN pretraining plus end-to-end policy training")
    _add_config_args(p)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="train or identify a comparison method")
    _add_config_args(p)
    p.add_argument("--method", choices=("sl", "sn", "rl"), required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint, writing an EvalReport")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full protocol: train and evaluate every repeat")
    _add_config_args(p)
    p.add_argument("--method", choices=harness.METHODS)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="tabulate report.json files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", invalid="ignore")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"koopctl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"koopctl: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"koopctl: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KoopctlError as exc:
        print(f"koopctl: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
