"""Policy networks: Koopman encoder + Ackermann gain, and a plain MLP policy.

Both policies expose the same two views used by the training loop:

* ``controller(training)`` returns a fast numpy function mapping a batch of
  measurements (N x D) to control means (N,), with the gain computed once;
* ``mean_expression(leaves, Y)`` records the same computation on a tape,
  given Vars for every parameter, and returns an (M x 1) Var.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from . import pole
from .diffnum import tape as ad
from .errors import ConfigError, InputError

HIDDEN = 8


def mlp(x, layers):
    """Affine layers with ReLU between them; the last layer is linear."""
    h = x
    for i, (w, b) in enumerate(layers):
        h = ad.add(ad.matmul(h, w), b)
        if i < len(layers) - 1:
            h = ad.relu(h)
    return h


def init_layers(sizes, rng, zero_last=False):
    """Weights and biases uniform in +-1/sqrt(fan_in)."""
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = rng.uniform(-bound, bound, size=(1, fan_out))
    if zero_last:
        n = len(sizes) - 1
        params[f"W{n}"] = np.zeros_like(params[f"W{n}"])
        params[f"b{n}"] = np.zeros_like(params[f"b{n}"])
    return params


def _layers(params, prefix=""):
    n = 1
    layers = []
    while f"{prefix}W{n}" in params:
        layers.append((params[f"{prefix}W{n}"], params[f"{prefix}b{n}"]))
        n += 1
    return layers


@dataclass
class KoopmanModel:
    """Latent linear dynamics ``g' = A g + B u`` with encoder ``g = psi(y)``.

    ``theta`` holds the encoder weights ``W1, b1, W2, b2``; ``None`` means the
    identity encoder (linear system identification). ``decoder`` is only set
    by the encoder-decoder identification baseline.
    """

    A: np.ndarray
    B: np.ndarray
    theta: dict = None
    decoder: dict = None

    @property
    def K(self):
        return self.A.shape[0]

    def encode(self, y, theta=None):
        theta = self.theta if theta is None else theta
        if theta is None:
            return y
        return mlp(y, _layers(theta))

    def parameters(self):
        params = {"A": self.A, "B": self.B}
        if self.theta is not None:
            params.update(self.theta)
        return params

    def with_parameters(self, params):
        theta = None
        if self.theta is not None:
            theta = {k: np.array(params[k]) for k in self.theta}
        return KoopmanModel(np.array(params["A"]), np.array(params["B"]), theta,
                            self.decoder)

    def copy(self):
        dec = None if self.decoder is None else {k: v.copy() for k, v in self.decoder.items()}
        return KoopmanModel(self.A.copy(), self.B.copy(),
                            None if self.theta is None else {k: v.copy() for k, v in self.theta.items()},
                            dec)


def init_koopman_model(D, K, rng, hidden=HIDDEN):
    """Cold-start model: random encoder, ``A = 0.9 I`` and small random ``B``."""
    theta = init_layers([D, hidden, K], rng)
    A = 0.9 * np.eye(K)
    B = rng.uniform(-0.1, 0.1, size=(K, 1))
    return KoopmanModel(A, B, theta)


def encode(y, theta):
    """Embed measurements (N x D or D,) with encoder weights ``theta``."""
    y = np.asarray(y, dtype=float) if not isinstance(y, ad.Var) else y
    single = not isinstance(y, ad.Var) and y.ndim == 1
    g = mlp(y[None, :] if single else y, _layers(theta))
    return g[0] if single else g


class KoopmanPolicy:
    """``u = -F psi(y)`` with ``F`` from Ackermann's formula on the latent (A, B)."""

    kind = "koopman"

    def __init__(self, model, target):
        self.model = model
        self.target = target if isinstance(target, pole.TargetSpectrum) else pole.TargetSpectrum(target)
        if len(self.target) != model.K:
            raise ConfigError(f"{len(self.target)} target eigenvalues for latent dimension {model.K}")

    @property
    def params(self):
        return self.model.parameters()

    def with_params(self, params):
        return KoopmanPolicy(self.model.with_parameters(params), self.target)

    def gain(self, training=False):
        return pole.ackermann(self.model.A, self.model.B, self.target, training=training)

    def controller(self, training=False):
        F = self.gain(training)
        model = self.model

        def mean(Y):
            return -(model.encode(np.asarray(Y, dtype=float)) @ F.T)[:, 0]

        return mean

    def mean_expression(self, leaves, Y):
        F = pole.ackermann(leaves["A"], leaves["B"], self.target, training=True)
        theta = None if self.model.theta is None else {k: leaves[k] for k in self.model.theta}
        g = self.model.encode(Y, theta)
        return ad.neg(ad.matmul(g, ad.transpose(F)))


def act_mean(y, model, target, training=False):
    """Deterministic control for one measurement vector."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InputError("measurement must be finite")
    policy = KoopmanPolicy(model, target)
    return float(policy.controller(training)(y[None, :])[0])


class MLPPolicy:
    """Model-free policy ``u = MLP(y)`` (D -> 8 -> 2 -> 1 by default)."""

    kind = "mlp"

    def __init__(self, params, target=None):
        self._params = params
        self.target = target

    @classmethod
    def init(cls, D, rng, hidden=(HIDDEN, 2), target=None):
        return cls(init_layers([D, *hidden, 1], rng, zero_last=True), target)

    @property
    def params(self):
        return self._params

    def with_params(self, params):
        return MLPPolicy({k: np.array(v) for k, v in params.items()}, self.target)

    def controller(self, training=False):
        layers = _layers(self._params)

        def mean(Y):
            return mlp(np.asarray(Y, dtype=float), layers)[:, 0]

        return mean

    def mean_expression(self, leaves, Y):
        return mlp(Y, _layers(leaves))


@dataclass
class ControlDistribution:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigError("control variance must be positive")


def exploration_variance(control_bounds):
    """Half of the width of the control interval."""
    lo, hi = control_bounds
    return 0.5 * (hi - lo)


def sample_control(mean, variance, rng, bounds=None):
    """Draw ``u_raw ~ N(mean, variance)``; returns ``(u_applied, u_raw, logp)``.

    ``logp`` is evaluated at the pre-clip sample and is a Var when ``mean`` is.
    """
    dist = ControlDistribution(float(ad.value(mean).reshape(-1)[0]), variance)
    u_raw = dist.mean + math.sqrt(dist.variance) * rng.standard_normal()
    u_applied = u_raw if bounds is None else float(np.clip(u_raw, *bounds))
    logp = ad.gaussian_logp(np.array([[u_raw]]), mean if isinstance(mean, ad.Var) else np.array([[dist.mean]]),
                            dist.variance)
    return u_applied, u_raw, logp


def _to_lists(params):
    out = {}
    for k, v in params.items():
        v = np.asarray(v)
        out[k] = v.reshape(-1).tolist() if k.startswith("b") else v.tolist()
    return out


def _from_lists(params):
    out = {}
    for k, v in params.items():
        a = np.array(v, dtype=float)
        out[k] = a.reshape(1, -1) if k.startswith("b") else a
    return out


def policy_to_dict(policy, system="", config_hash=""):
    doc = {"system": system, "target": None if policy.target is None else policy.target.to_json()}
    if isinstance(policy, KoopmanPolicy):
        m = policy.model
        doc.update({
            "kind": "koopman" if m.theta is not None else "linear",
            "A": m.A.tolist(),
            "B": m.B.tolist(),
            "theta": None if m.theta is None else _to_lists(m.theta),
        })
        if m.decoder is not None:
            doc["decoder"] = _to_lists(m.decoder)
    else:
        doc.update({"kind": "mlp", "weights": _to_lists(policy.params)})
    doc["config_hash"] = config_hash
    return doc


def policy_from_dict(doc, target=None):
    kind = doc.get("kind", "koopman")
    if target is None and doc.get("target"):
        target = pole.TargetSpectrum.from_json(doc["target"])
    if kind == "mlp":
        return MLPPolicy(_from_lists(doc["weights"]), target)
    theta = None if doc.get("theta") is None else _from_lists(doc["theta"])
    decoder = None if doc.get("decoder") is None else _from_lists(doc["decoder"])
    model = KoopmanModel(np.array(doc["A"], dtype=float), np.array(doc["B"], dtype=float), theta, decoder)
    return KoopmanPolicy(model, target)


def save_checkpoint(policy, path, system="", config_hash=""):
    with open(path, "w") as fh:
        json.dump(policy_to_dict(policy, system, config_hash), fh, indent=1)
        fh.write("\n")


def load_checkpoint(path, target=None):
    with open(path) as fh:
        doc = json.load(fh)
    return policy_from_dict(doc, target), doc
