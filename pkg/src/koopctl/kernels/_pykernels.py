"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them line for line.
"""
import math

import numpy as np

VAN_DER_POL = 0
FITZHUGH_NAGUMO = 1
DUFFING = 2
ROSSLER_PRINTED = 3
ROSSLER_STANDARD = 4


def vector_field(kind, p, x, u):
    """Time derivative for a batch of states ``x`` (N x Dx) under controls ``u`` (N,)."""
    out = np.empty_like(x)
    if kind == VAN_DER_POL:
        a, b = p[0], p[1]
        out[:, 0] = x[:, 1]
        out[:, 1] = a * x[:, 1] * (1.0 - x[:, 0] * x[:, 0]) - b * x[:, 0] + u
    elif kind == FITZHUGH_NAGUMO:
        a, b, c, current = p[0], p[1], p[2], p[3]
        out[:, 0] = x[:, 0] - x[:, 0] ** 3 / 3.0 - x[:, 1] + current
        out[:, 1] = c * (x[:, 0] - a - b * x[:, 1]) + u
    elif kind == DUFFING:
        a, b, c = p[0], p[1], p[2]
        out[:, 0] = x[:, 1]
        out[:, 1] = b * x[:, 0] - a * x[:, 0] ** 3 - c * x[:, 1] + u
    elif kind == ROSSLER_PRINTED:
        a, b, c = p[0], p[1], p[2]
        out[:, 0] = -x[:, 1] - x[:, 0]
        out[:, 1] = x[:, 0] - a * x[:, 1] + u
        out[:, 2] = b + x[:, 0] * x[:, 2] - c * x[:, 2]
    elif kind == ROSSLER_STANDARD:
        a, b, c = p[0], p[1], p[2]
        out[:, 0] = -x[:, 1] - x[:, 2]
        out[:, 1] = x[:, 0] + a * x[:, 1] + u
        out[:, 2] = b + x[:, 2] * (x[:, 0] - c)
    else:
        raise ValueError(f"unknown vector field code {kind}")
    return out


def rk4_integrate(kind, params, x, u, h, substeps):
    """Advance ``x`` in place by ``substeps`` classical RK4 steps of size ``h``."""
    p = np.asarray(params, dtype=float)
    u = np.asarray(u, dtype=float)
    for _ in range(substeps):
        k1 = vector_field(kind, p, x, u)
        k2 = vector_field(kind, p, x + 0.5 * h * k1, u)
        k3 = vector_field(kind, p, x + 0.5 * h * k2, u)
        k4 = vector_field(kind, p, x + h * k3, u)
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, v, sweeps)`` with eigenvalues in no particular order and
    eigenvectors in the columns of ``v``. ``sweeps`` is -1 when the off-diagonal
    mass did not fall below ``tol * ||a||_F`` within ``max_sweeps``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = math.sqrt(float(np.sum(a * a)))
    if scale == 0.0:
        return np.zeros(n), v, 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if math.sqrt(2.0 * off) <= tol * scale:
            return np.diag(a).copy(), v, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p and q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, -1
