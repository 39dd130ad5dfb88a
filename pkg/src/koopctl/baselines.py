"""Two-step identify-then-place baselines and the model-free policy baseline.

* SL: least-squares fit of ``y' = A y + B u`` then Ackermann on (A, B).
* SN: encoder/decoder with latent linear dynamics fitted by multi-step
  prediction, then Ackermann on the latent (A, B). Its model is also the
  warm start for end-to-end training.
* RL: an unstructured MLP policy trained by the same REINFORCE loop.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, pole
from .diffnum import linalg
from .diffnum import tape as ad
from .errors import ConfigError, IdentificationError, TrainingError
from .policy import HIDDEN, KoopmanModel, KoopmanPolicy, MLPPolicy, init_layers, mlp, _layers
from .train import Adam, train

log = logging.getLogger(__name__)

SL_RIDGE = 1e-10


@dataclass
class IdDataset:
    """``N`` equal-length sequences: measurements (N x T x D), controls (N x T-1)."""

    measurements: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        self.measurements = np.asarray(self.measurements, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        n, T, _ = self.measurements.shape
        if self.controls.shape != (n, T - 1):
            raise ConfigError(f"controls must be {(n, T - 1)}, got {self.controls.shape}")

    @classmethod
    def from_trajectories(cls, trajs):
        return cls(np.stack([t.measurements for t in trajs]), np.stack([t.controls for t in trajs]))

    @property
    def N(self):
        return self.measurements.shape[0]

    @property
    def T(self):
        return self.measurements.shape[1]

    @property
    def D(self):
        return self.measurements.shape[2]


def collect_dataset(spec, n=100, T=200, seed=0):
    """Random-control identification data."""
    return IdDataset.from_trajectories(dynamics.collect_random(spec, n, T, seed))


def fit_sl(data):
    """Least-squares ``(A, B)`` of ``y_{t+1} = A y_t + B u_t`` over all transitions."""
    D = data.D
    X = data.measurements[:, :-1].reshape(-1, D)
    U = data.controls.reshape(-1, 1)
    Yn = data.measurements[:, 1:].reshape(-1, D)
    if X.shape[0] < D + 1:
        raise IdentificationError(f"{X.shape[0]} transitions cannot identify {D + 1} regressors")
    Z = np.hstack([X, U])
    gram = Z.T @ Z
    if not np.any(gram):
        raise IdentificationError("regressor matrix is identically zero")
    theta = linalg.solve(gram + SL_RIDGE * np.eye(D + 1), Z.T @ Yn)
    return theta[:D].T.copy(), theta[D:].T.copy()


def sl_residual(data, A, B):
    X = data.measurements[:, :-1].reshape(-1, data.D)
    U = data.controls.reshape(-1, 1)
    Yn = data.measurements[:, 1:].reshape(-1, data.D)
    return float(np.sum((Yn - X @ A.T - U @ B.T) ** 2))


def placement_target(target, dim):
    """Extend ``target`` with poles at the origin up to ``dim`` eigenvalues."""
    vals = list(getattr(target, "values", target))
    if len(vals) > dim:
        raise ConfigError(f"cannot place {len(vals)} eigenvalues with a {dim}-dimensional model")
    return pole.TargetSpectrum(vals + [0.0] * (dim - len(vals)))


def sl_policy(A, B, target):
    """Identity-embedding policy for an identified linear model."""
    model = KoopmanModel(np.asarray(A, dtype=float), np.asarray(B, dtype=float).reshape(-1, 1))
    return KoopmanPolicy(model, placement_target(target, model.K))


def control_from_id(model, target):
    """Evaluation-mode Ackermann gain for an identified model (raises if uncontrollable)."""
    return pole.ackermann(model.A, model.B, placement_target(target, model.K), training=False)


@dataclass
class SNConfig:
    n_sequences: int = 100
    T: int = 200
    horizon: int = 4
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 10
    K: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if self.T <= self.horizon + 1:
            raise ConfigError("T must exceed horizon + 1")
        if self.epochs < 0 or self.batch_size < 1 or self.n_sequences < 1:
            raise ConfigError("invalid SN training sizes")


def init_sn_model(D, K, rng, hidden=HIDDEN):
    theta = init_layers([D, hidden, K], rng)
    decoder = init_layers([K, hidden, D], rng)
    A = 0.9 * np.eye(K) + rng.uniform(-0.1, 0.1, size=(K, K))
    B = rng.uniform(-0.1, 0.1, size=(K, 1))
    return KoopmanModel(A, B, theta, decoder)


def _sn_params(model):
    params = {"A": model.A, "B": model.B}
    params.update(model.theta)
    params.update({"d" + k: v for k, v in model.decoder.items()})
    return params


def _sn_model(params):
    theta = {k: params[k] for k in ("W1", "b1", "W2", "b2")}
    decoder = {k[1:]: params[k] for k in params if k.startswith("d")}
    return KoopmanModel(params["A"], params["B"], theta, decoder)


def sn_loss(params, Y, U, horizon):
    """Mean squared multi-step reconstruction/prediction error.

    Level ``l`` predicts ``y_{t+l}`` from ``psi(y_t)`` propagated ``l`` steps by
    the latent dynamics with the recorded controls; ``l = 0`` is plain
    reconstruction. Works on arrays or tape Vars in ``params``.
    """
    n, T, D = Y.shape
    enc = _layers(params)
    dec = _layers(params, prefix="d")
    t_idx = np.tile(np.arange(T), n)
    s_idx = np.repeat(np.arange(n), T)
    Yf = Y.reshape(-1, D)
    Uf = np.concatenate([U, np.zeros((n, 1))], axis=1).reshape(-1)
    z = mlp(Yf, enc)
    rows = np.arange(n * T)
    total = None
    count = 0
    for level in range(horizon + 1):
        if level > 0:
            keep = t_idx[rows] <= T - 1 - level
            z = ad.take_rows(z, np.flatnonzero(keep))
            rows = rows[keep]
            u = Uf[s_idx[rows] * T + t_idx[rows] + level - 1].reshape(-1, 1)
            z = ad.add(ad.matmul(z, ad.transpose(params["A"])), ad.matmul(u, ad.transpose(params["B"])))
        target = Yf[s_idx[rows] * T + t_idx[rows] + level]
        err = ad.sub(mlp(z, dec), target)
        term = ad.sum_all(ad.mul(err, err))
        total = term if total is None else ad.add(total, term)
        count += err.shape[0] * D
    return ad.scale(total, 1.0 / count)


def fit_sn(data, cfg=SNConfig(), model=None):
    """Fit encoder, decoder and latent (A, B); returns ``(model, loss_curve)``."""
    if data.T <= cfg.horizon + 1:
        raise ConfigError("sequences are too short for the prediction horizon")
    rng = np.random.default_rng([cfg.seed, 11])
    model = model or init_sn_model(data.D, cfg.K, rng)
    params = _sn_params(model)
    opt = Adam(cfg.lr)
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(data.N)
        losses = []
        for start in range(0, data.N, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            tape = ad.Tape()
            leaves = {k: tape.leaf(v, name=k) for k, v in params.items()}
            loss = sn_loss(leaves, data.measurements[idx], data.controls[idx], cfg.horizon)
            value = float(loss.value[0, 0])
            if not math.isfinite(value):
                raise TrainingError(f"SN loss diverged at epoch {epoch}")
            tape.backward(loss)
            params = opt.step(params, {k: v.grad for k, v in leaves.items()})
            losses.append(value)
        curve.append(float(np.mean(losses)))
    return _sn_model(params), curve


def sn_policy(model, target):
    """Fixed-model SN controller (decoder ignored)."""
    return KoopmanPolicy(model, target)


def pretrain_sn(spec, sn_cfg):
    data = collect_dataset(spec, sn_cfg.n_sequences, sn_cfg.T, sn_cfg.seed)
    return fit_sn(data, sn_cfg)


def train_rl(spec, target, cfg, hidden=(HIDDEN, 2), log_path=None):
    """REINFORCE on an MLP policy whose last layer starts at zero."""
    rng = np.random.default_rng([cfg.seed, 13])
    policy = MLPPolicy.init(spec.measurement_dim, rng, hidden, target=target)
    return train(spec, target, cfg, policy, log_path=log_path)
