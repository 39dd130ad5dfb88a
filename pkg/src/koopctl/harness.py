"""Experiment configuration, the evaluation protocol and on-disk artifacts.

Configs are flat JSON objects with dotted keys (``"train.lr": 0.001``); the
same keys are accepted as ``--set key=value`` overrides on the command line.
"""
import hashlib
import json
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import baselines, dmd, dynamics, plots, pole
from .errors import ConfigError, KoopctlError
from .policy import KoopmanPolicy, init_koopman_model, save_checkpoint
from .train import TrainConfig, episode_seeds, eigenvalue_error, run_episodes, train

METHODS = ("ours", "sl", "sn", "rl")
EVAL_STREAM = 4

_SYSTEM_KEYS = {"noise_std", "dt", "substeps", "init_box", "rossler_standard", "params",
                "state_bounds", "control_bounds"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}
_SN_KEYS = {f.name for f in fields(baselines.SNConfig)} - {"seed", "K"}

DEFAULTS = {
    "system": "vdp",
    "method": "ours",
    "target.abs": 1.0,
    "target.arg": 0.1,
    "seed": None,
    "output_dir": "runs/experiment",
    "pretrain": True,
    "eval.runs": 50,
    "eval.repeats": 10,
    "eval.saved_runs": 1,
}
# keys that do not change trained artifacts and so stay out of the hash
_UNHASHED = ("output_dir", "eval.")


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        out[key.strip()] = parse_value(text.strip())
    return out


def load_config_file(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


@dataclass
class ExperimentConfig:
    flat: dict
    spec: object
    target: pole.TargetSpectrum
    method: str
    train: TrainConfig
    sn: baselines.SNConfig
    seed: int
    runs: int
    repeats: int
    saved_runs: int
    output_dir: Path
    pretrain: bool

    @property
    def config_hash(self):
        return config_hash(self.flat)

    def repeat_seed(self, repeat):
        return int(np.random.SeedSequence([self.seed, repeat]).generate_state(1)[0])

    def for_repeat(self, repeat):
        """Train/SN configs seeded for one repeat."""
        seed = self.repeat_seed(repeat)
        return seed, replace(self.train, seed=seed), replace(self.sn, seed=seed)


def config_hash(flat):
    ident = {k: v for k, v in flat.items() if not k.startswith(_UNHASHED)}
    blob = json.dumps(ident, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def resolve(flat_config=None, overrides=None):
    """Merge defaults, a flat config and overrides into an :class:`ExperimentConfig`."""
    flat = dict(DEFAULTS)
    flat.update(flat_config or {})
    flat.update(overrides or {})
    if flat.get("seed") is None:
        env = os.environ.get("KOOPCTL_SEED")
        try:
            flat["seed"] = int(env) if env is not None else 0
        except ValueError:
            raise ConfigError(f"KOOPCTL_SEED={env!r} is not an integer") from None

    sys_over, train_over, sn_over = {}, {}, {}
    for key, val in flat.items():
        if key in DEFAULTS:
            continue
        group, _, name = key.partition(".")
        if group == "system" and name in _SYSTEM_KEYS:
            sys_over[name] = val
        elif group == "train" and name in _TRAIN_KEYS:
            train_over[name] = val
        elif group == "sn" and name in _SN_KEYS:
            sn_over[name] = val
        else:
            raise ConfigError(f"unknown config key {key!r}")

    method = flat["method"]
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    try:
        seed = int(flat["seed"])
        spec = dynamics.make_system(str(flat["system"]), **sys_over)
        target = pole.TargetSpectrum.from_polar(flat["target.abs"], flat["target.arg"])
        tc = TrainConfig(seed=seed, **train_over)
        sn_over.setdefault("T", tc.T)
        sc = baselines.SNConfig(seed=seed, K=len(target), **sn_over)
        runs, repeats, saved = int(flat["eval.runs"]), int(flat["eval.repeats"]), int(flat["eval.saved_runs"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if runs < 1 or repeats < 1 or saved < 0:
        raise ConfigError("eval.runs and eval.repeats must be >= 1")
    return ExperimentConfig(flat, spec, target, method, tc, sc, seed, runs, repeats, saved,
                            Path(flat["output_dir"]), bool(flat["pretrain"]))


def build_policy(cfg, repeat=0, log_path=None):
    """Identify and/or train the controller for one repeat of ``cfg.method``."""
    seed, tc, sc = cfg.for_repeat(repeat)
    spec, target = cfg.spec, cfg.target
    if cfg.method == "sl":
        data = baselines.collect_dataset(spec, sc.n_sequences, sc.T, sc.seed)
        A, B = baselines.fit_sl(data)
        return baselines.sl_policy(A, B, target), {"sl_residual": baselines.sl_residual(data, A, B)}
    if cfg.method == "rl":
        policy, curve = baselines.train_rl(spec, target, tc, log_path=log_path)
        return policy, {"curve": curve}
    if cfg.method == "sn" or cfg.pretrain:
        model, sn_curve = baselines.pretrain_sn(spec, sc)
    else:
        model = init_koopman_model(spec.measurement_dim, len(target), np.random.default_rng([seed, 17]))
        sn_curve = []
    policy = KoopmanPolicy(model, target)
    if cfg.method == "sn":
        return policy, {"sn_loss": sn_curve}
    best, curve = train(spec, target, tc, policy, log_path=log_path)
    return best, {"sn_loss": sn_curve, "curve": curve}


def evaluate(policy, spec, target, runs, T, tau=5, seed=0):
    """Exploration-free rollouts scored by the eigenvalue error.

    Returns one dict per run with the estimated eigenvalues, the error and a
    status; a run whose eigenvalue estimation fails has status ``"failed"``.
    """
    vals = getattr(target, "values", target)
    hankel = dmd.HankelConfig(tau, len(vals))
    seeds = episode_seeds(seed, EVAL_STREAM, 0, runs)
    Y, _, u = run_episodes(spec, policy.controller(training=False), T, seeds)
    results = []
    for i in range(runs):
        try:
            est = dmd.estimate_eigs(Y[i], hankel)
        except KoopctlError as exc:
            results.append({"status": "failed", "reason": str(exc), "error": None, "eigenvalues": []})
            continue
        results.append({
            "status": "ok",
            "error": eigenvalue_error(vals, est),
            "eigenvalues": [{"re": float(v.real), "im": float(v.imag)} for v in est],
        })
    return results, Y, u


def standard_error(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def build_report(cfg, per_repeat_runs):
    per_repeat = []
    means = []
    for runs in per_repeat_runs:
        errs = [r["error"] for r in runs if r["status"] == "ok"]
        mean = float(np.mean(errs)) if errs else None
        if mean is not None:
            means.append(mean)
        per_repeat.append({
            "mean_error": mean,
            "failed_runs": sum(r["status"] != "ok" for r in runs),
            "errors": [r["error"] for r in runs],
            "eigenvalues": [r["eigenvalues"] for r in runs],
        })
    return {
        "system": cfg.spec.kind,
        "target": {"abs": float(cfg.flat["target.abs"]), "arg": float(cfg.flat["target.arg"])},
        "method": cfg.method,
        "runs": cfg.runs,
        "repeats": cfg.repeats,
        "mean_error": float(np.mean(means)) if means else None,
        "stderr": standard_error(means) if means else None,
        "per_repeat": per_repeat,
        "config_hash": cfg.config_hash,
    }


def dumps_report(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def snapshot(cfg):
    doc = dict(cfg.flat)
    doc["output_dir"] = str(doc["output_dir"])
    doc["config_hash"] = cfg.config_hash
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_experiment(cfg, dry_run=False):
    """Train and evaluate ``cfg.repeats`` times; write every artifact under ``cfg.output_dir``.

    Returns the EvalReport dict (``None`` for a dry run, which writes nothing).
    """
    if dry_run:
        return None
    out = cfg.output_dir
    try:
        (out / "trajectories").mkdir(parents=True, exist_ok=True)
        (out / "plots").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    _write(out / "config.json", snapshot(cfg))
    per_repeat = []
    for r in range(cfg.repeats):
        seed = cfg.repeat_seed(r)
        log_path = out / f"train_log_{r}.jsonl" if cfg.method in ("ours", "rl") else None
        policy, info = build_policy(cfg, r, log_path)
        save_checkpoint(policy, out / f"checkpoint_{r}.json", cfg.spec.kind, cfg.config_hash)
        if "sn_loss" in info and info["sn_loss"]:
            _write(out / f"sn_loss_{r}.json", json.dumps(info["sn_loss"]) + "\n")
        runs, Y, u = evaluate(policy, cfg.spec, cfg.target, cfg.runs, cfg.train.T, cfg.train.tau, seed)
        per_repeat.append(runs)
        if r == 0:
            for i in range(min(cfg.saved_runs, cfg.runs)):
                traj = dynamics.Trajectory(Y[i], u[i])
                dynamics.trajectory_to_csv(traj, out / "trajectories" / f"repeat{r}_run{i}.csv")
                title = (f"{cfg.spec.kind} {cfg.method} |lambda|={cfg.flat['target.abs']} "
                         f"arg={cfg.flat['target.arg']}")
                _write(out / "plots" / f"repeat{r}_run{i}.svg", plots.trajectory_svg(traj, title))
    report = build_report(cfg, per_repeat)
    _write(out / "report.json", dumps_report(report))
    return report


def evaluate_checkpoint(cfg, policy, doc):
    """Evaluate a saved policy under ``cfg``; refuses checkpoints trained under another config."""
    if doc.get("config_hash") and doc["config_hash"] != cfg.config_hash:
        raise ConfigError(
            f"checkpoint config hash {doc['config_hash']} does not match config hash {cfg.config_hash}"
        )
    runs, _, _ = evaluate(policy, cfg.spec, cfg.target, cfg.runs, cfg.train.T, cfg.train.tau,
                          cfg.repeat_seed(0))
    return build_report(replace(cfg, repeats=1), [runs])


def summary_rows(reports):
    rows = []
    for rep in reports:
        rows.append({
            "system": rep.get("system", ""),
            "abs": rep["target"]["abs"],
            "arg": rep["target"]["arg"],
            "method": rep["method"],
            "mean_error": rep["mean_error"],
            "stderr": rep["stderr"],
        })
    rows.sort(key=lambda r: (r["system"], -r["abs"], r["arg"], METHODS.index(r["method"])
                             if r["method"] in METHODS else 99))
    return rows
