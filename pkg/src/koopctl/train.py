"""REINFORCE training with a terminal spectral reward.

One epoch collects a batch of exploratory episodes with the gain fixed from
the current parameters, scores each finished trajectory by the distance
between its Hankel-DMD eigenvalues and the target, and takes one Adam ascent
step on the baseline-subtracted score-function surrogate.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import dmd
from .diffnum import tape as ad
from .errors import ConfigError, DimensionError, KoopctlError, NumericError, RewardError
from .policy import exploration_variance

log = logging.getLogger(__name__)

# stream tags for SeedSequence([seed, tag, ...])
TRAIN_STREAM = 1
VALIDATION_STREAM = 2
EXPLORATION_STREAM = 3


@dataclass
class TrainConfig:
    epochs_max: int = 10000
    batch_size: int = 10
    lr: float = 1e-3
    gamma: float = 0.99
    T: int = 200
    tau: int = 5
    eval_every: int = 50
    patience: int = 20
    seed: int = 0
    validation_rollouts: int = 10
    control_cost: float = 0.0
    variance: float = None

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.T < self.tau + 2:
            raise ConfigError("T must be at least tau + 2")
        if self.epochs_max < 0 or self.eval_every < 1 or self.patience < 1:
            raise ConfigError("epochs_max >= 0, eval_every >= 1 and patience >= 1 are required")
        if self.validation_rollouts < 1:
            raise ConfigError("validation_rollouts must be >= 1")
        if self.variance is not None and not self.variance > 0:
            raise ConfigError("variance must be positive")


def episode_seeds(seed, stream, index, n):
    return [int(s) for s in np.random.SeedSequence([seed, stream, index]).generate_state(n)]


def eigenvalue_error(target, estimate):
    """Mean over targets of the distance to the nearest estimated eigenvalue."""
    target = np.asarray(getattr(target, "values", target), dtype=complex)
    estimate = np.asarray(estimate, dtype=complex)
    return float(np.mean(np.min(np.abs(target[:, None] - estimate[None, :]), axis=1)))


def spectral_reward(y, target, cfg=None):
    """Negative eigenvalue error of the trajectory's Hankel-DMD spectrum."""
    vals = getattr(target, "values", target)
    cfg = cfg or dmd.HankelConfig(rank=len(vals))
    try:
        est = dmd.estimate_eigs(y, cfg)
    except (NumericError, DimensionError) as exc:
        raise RewardError(f"eigenvalue estimation failed: {exc}") from exc
    return -eigenvalue_error(vals, est)


def run_episodes(spec, controller, T, seeds, variance=None, explore_seeds=None):
    """Roll out ``len(seeds)`` episodes in lockstep.

    With ``variance`` set, controls are drawn from N(mean, variance) using one
    stream per episode; otherwise the mean is applied. Returns measurements
    (N x T x D), raw controls and clipped controls (N x T-1).
    """
    plant = spec.plant(seeds)
    n = len(seeds)
    Y = np.empty((n, T, spec.measurement_dim))
    Y[:, 0] = plant.reset()
    u_raw = np.empty((n, T - 1))
    lo, hi = spec.control_bounds
    rngs = None
    if variance is not None:
        rngs = [np.random.default_rng(s) for s in explore_seeds]
        sd = math.sqrt(variance)
    for t in range(T - 1):
        mean = controller(Y[:, t])
        if rngs is not None:
            noise = np.array([r.standard_normal() for r in rngs])
            mean = mean + sd * noise
        u_raw[:, t] = mean
        Y[:, t + 1] = plant.step(np.clip(np.nan_to_num(mean, posinf=hi, neginf=lo), lo, hi))
    return Y, u_raw, np.clip(u_raw, lo, hi)


@dataclass
class RolloutBatch:
    measurements: np.ndarray  # N x T x D
    raw_controls: np.ndarray  # N x T-1, pre-clip samples
    controls: np.ndarray  # N x T-1, applied
    rewards: np.ndarray  # N, terminal reward (nan when dropped)
    returns: np.ndarray  # N x T-1, discounted return from each step
    kept: np.ndarray  # N, bool
    variance: float

    @property
    def dropped(self):
        return int((~self.kept).sum())


def discounted_returns(terminal, step_rewards, gamma):
    """``R_t = sum_{t' >= t} gamma^(t'-t) r_t'`` with the terminal reward at t = T.

    ``step_rewards`` (N x T-1) are the per-step rewards attached to actions
    ``u_1..u_{T-1}``.
    """
    n, steps = step_rewards.shape
    R = np.empty((n, steps))
    acc = terminal * gamma  # reward at T seen from step T-1
    for t in range(steps - 1, -1, -1):
        acc = step_rewards[:, t] + acc
        R[:, t] = acc
        acc = gamma * acc
    return R


def collect_batch(policy, spec, target, cfg, epoch=0):
    variance = cfg.variance or exploration_variance(spec.control_bounds)
    n = cfg.batch_size
    controller = policy.controller(training=True)
    seeds = episode_seeds(cfg.seed, TRAIN_STREAM, epoch, n)
    explore = episode_seeds(cfg.seed, EXPLORATION_STREAM, epoch, n)
    Y, u_raw, u = run_episodes(spec, controller, cfg.T, seeds, variance, explore)
    hankel = dmd.HankelConfig(cfg.tau, len(getattr(target, "values", target)))
    rewards = np.full(n, np.nan)
    kept = np.zeros(n, dtype=bool)
    for i in range(n):
        try:
            rewards[i] = spectral_reward(Y[i], target, hankel)
            kept[i] = True
        except RewardError as exc:
            log.info("dropping episode %d of epoch %d: %s", i, epoch, exc)
    step_rewards = -cfg.control_cost * u * u
    returns = discounted_returns(np.nan_to_num(rewards), step_rewards, cfg.gamma)
    return RolloutBatch(Y, u_raw, u, rewards, returns, kept, variance)


def surrogate(policy, batch, leaves=None, use_baseline=True):
    """``(1/N) sum_n sum_t (R_t^n - b_t) log p(u_t^n | y_t^n)`` over kept episodes.

    With ``leaves`` (name -> Var) the value is recorded on their tape.
    """
    idx = np.flatnonzero(batch.kept)
    if idx.size == 0:
        raise ConfigError("batch has no usable episodes")
    R = batch.returns[idx]
    adv = R - R.mean(axis=0, keepdims=True) if use_baseline else R
    steps = R.shape[1]
    D = batch.measurements.shape[2]
    Y = batch.measurements[idx, :steps].reshape(-1, D)
    params = leaves if leaves is not None else policy.params
    means = policy.mean_expression(params, Y)
    logp = ad.gaussian_logp(batch.raw_controls[idx].reshape(-1, 1), means, batch.variance)
    return ad.scale(ad.sum_all(ad.mul(adv.reshape(-1, 1), logp)), 1.0 / idx.size)


def surrogate_gradient(policy, batch, use_baseline=True):
    tape = ad.Tape()
    leaves = {k: tape.leaf(v, name=k) for k, v in policy.params.items()}
    out = surrogate(policy, batch, leaves, use_baseline)
    tape.backward(out)
    return float(out.value[0, 0]), {k: v.grad for k, v in leaves.items()}


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        """Return parameters moved against ``grads`` (minimisation)."""
        self.t += 1
        out = {}
        for k, p in params.items():
            g = grads[k]
            m = self.beta1 * self.m.get(k, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(k, 0.0) + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            out[k] = p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def policy_gradient_step(batch, policy, optimizer, use_baseline=True):
    """One ascent step; returns ``(policy, grad_norm, skipped)``."""
    if not batch.kept.any():
        return policy, float("nan"), True
    try:
        with np.errstate(invalid="ignore", over="ignore"):
            _, grads = surrogate_gradient(policy, batch, use_baseline)
    except KoopctlError as exc:
        log.warning("skipping update: %s", exc)
        return policy, float("nan"), True
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if not math.isfinite(norm):
        log.warning("skipping update: non-finite gradient")
        return policy, norm, True
    params = optimizer.step(policy.params, {k: -g for k, g in grads.items()})
    return policy.with_params(params), norm, False


def validate(policy, spec, target, cfg, seeds=None):
    """Mean terminal reward of exploration-free episodes (dropped episodes ignored)."""
    seeds = seeds or episode_seeds(cfg.seed, VALIDATION_STREAM, 0, cfg.validation_rollouts)
    try:
        controller = policy.controller(training=False)
    except NumericError:
        return -math.inf
    Y, _, _ = run_episodes(spec, controller, cfg.T, seeds)
    hankel = dmd.HankelConfig(cfg.tau, len(getattr(target, "values", target)))
    rewards = []
    for y in Y:
        try:
            rewards.append(spectral_reward(y, target, hankel))
        except RewardError:
            pass
    return float(np.mean(rewards)) if rewards else -math.inf


def train(spec, target, cfg, policy, log_path=None):
    """Run REINFORCE from ``policy``; returns the best-on-validation policy and the curve."""
    optimizer = Adam(cfg.lr)
    best = policy
    best_val = validate(policy, spec, target, cfg)
    curve = [{"epoch": 0, "mean_reward": None, "validation_reward": best_val,
              "dropped_episodes": 0, "grad_norm": None}]
    stale = 0
    fh = open(log_path, "w") if log_path else None
    try:
        if fh:
            fh.write(json.dumps(curve[0]) + "\n")
        for epoch in range(1, cfg.epochs_max + 1):
            batch = collect_batch(policy, spec, target, cfg, epoch)
            kept = batch.rewards[batch.kept]
            policy, grad_norm, skipped = policy_gradient_step(batch, policy, optimizer)
            entry = {
                "epoch": epoch,
                "mean_reward": float(kept.mean()) if kept.size else None,
                "validation_reward": None,
                "dropped_episodes": batch.dropped,
                "grad_norm": None if skipped and not math.isfinite(grad_norm) else grad_norm,
            }
            stop = False
            if epoch % cfg.eval_every == 0 or epoch == cfg.epochs_max:
                val = validate(policy, spec, target, cfg)
                entry["validation_reward"] = val
                if val > best_val:
                    best, best_val, stale = policy, val, 0
                else:
                    stale += 1
                    stop = stale >= cfg.patience
            curve.append(entry)
            if fh:
                fh.write(json.dumps(entry) + "\n")
            if stop:
                log.info("early stop at epoch %d (best validation %.5f)", epoch, best_val)
                break
    finally:
        if fh:
            fh.close()
    return best, curve


def config_dict(cfg):
    return asdict(cfg)
