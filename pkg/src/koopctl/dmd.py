"""Hankel dynamic mode decomposition: Koopman eigenvalues of a trajectory."""
from dataclasses import dataclass

import numpy as np

from .diffnum import linalg
from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class HankelConfig:
    tau: int = 5
    rank: int = 2

    def __post_init__(self):
        if self.tau < 1 or self.rank < 1:
            raise ConfigError("tau and rank must be >= 1")

    def check(self, T, D):
        if T < self.tau + 2:
            raise DimensionError(f"trajectory of length {T} too short for delay {self.tau}")
        if D * self.tau < self.rank or T - self.tau < self.rank:
            raise DimensionError(
                f"rank {self.rank} exceeds Hankel dimensions {D * self.tau}x{T - self.tau}"
            )


def _measurements(y):
    y = getattr(y, "measurements", y)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    return y


def hankel_pair(y, tau):
    """Delay-embedded snapshot matrices ``H1`` and its one-step shift ``H2``.

    Column ``j`` of ``H1`` stacks ``y_j .. y_{j+tau-1}``; both are ``D*tau x (T-tau)``.
    """
    y = _measurements(y)
    T, D = y.shape
    if tau < 1 or T < tau + 2:
        raise DimensionError(f"need T >= tau + 2, got T={T}, tau={tau}")
    cols = T - tau
    # stacked[j] = concat(y_j, ..., y_{j+tau})
    idx = np.arange(cols)[:, None] + np.arange(tau + 1)[None, :]
    stacked = y[idx].reshape(cols, (tau + 1) * D)
    h1 = stacked[:, : tau * D].T.copy()
    h2 = stacked[:, D:].T.copy()
    return h1, h2


def koopman_matrix(y, cfg):
    """Reduced operator ``U^T H2 V S^-1`` from the rank-``cfg.rank`` SVD of ``H1``."""
    y = _measurements(y)
    cfg.check(*y.shape)
    h1, h2 = hankel_pair(y, cfg.tau)
    u, s, v = linalg.svd_thin(h1, cfg.rank)
    return (u.T @ h2 @ v) / np.diag(s)[None, :]


def sort_eigenvalues(vals, tol=1e-9):
    """Descending modulus; values whose moduli agree within ``tol`` by descending argument."""
    vals = np.asarray(vals, dtype=complex)
    order = sorted(range(len(vals)), key=lambda i: -abs(vals[i]))
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        ref = abs(vals[order[i]])
        while j < len(order) and abs(abs(vals[order[j]]) - ref) <= tol * max(1.0, ref):
            j += 1
        group = sorted(order[i:j], key=lambda k: -np.angle(vals[k]))
        out.extend(group)
        i = j
    return vals[out]


def estimate_eigs(y, cfg=HankelConfig()):
    """Estimated Koopman eigenvalues of the trajectory, sorted (see ``sort_eigenvalues``)."""
    a_hat = koopman_matrix(y, cfg)
    vals, _ = linalg.eig_small(a_hat)
    return sort_eigenvalues(vals)


def eigs_to_json(vals):
    return [
        {"re": float(v.real), "im": float(v.imag), "abs": float(abs(v)), "arg": float(np.angle(v))}
        for v in vals
    ]
