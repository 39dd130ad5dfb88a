"""Small dense linear algebra: LU solve, thin SVD and eigendecomposition.

Matrices are plain 2-D ``float64`` numpy arrays; complex results use
``complex128`` arrays. Sizes are tiny (K <= 16, Hankel blocks of ~10 x 200),
so the routines favour clarity over blocking.
"""
import cmath
import math

import numpy as np

from .. import kernels
from ..errors import ConvergenceError, DimensionError, RankDeficiencyError, SingularMatrixError

PIVOT_TOL = 1e-12
SINGULAR_VALUE_TOL = 1e-12
# Singular values below this fraction of the largest one are not resolved by
# the Gram-matrix route (its eigenvalues carry ~eps * sigma_max**2 of error).
RELATIVE_SINGULAR_VALUE_TOL = 1e-7


def as_mat(x):
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    return a


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def lu_factor(a):
    """LU factorisation with partial pivoting, ``P a = L U`` packed in one array.

    Raises SingularMatrixError when a pivot falls below ``PIVOT_TOL`` in magnitude.
    """
    lu = np.array(a, dtype=float)
    n, m = lu.shape
    if n != m:
        raise DimensionError(f"LU needs a square matrix, got {lu.shape}")
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < PIVOT_TOL:
            raise SingularMatrixError(k, lu[p, k])
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def lu_solve(factors, b):
    lu, perm = factors
    x = np.array(b, dtype=float)[perm]
    n = lu.shape[0]
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] -= lu[i, i + 1:] @ x[i + 1:]
        x[i] /= lu[i, i]
    return x


def solve(a, b):
    """Return ``X`` with ``a @ X = b`` (``b`` may have several columns)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"solve needs a square matrix, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"right-hand side has {b.shape[0]} rows, expected {a.shape[0]}")
    return lu_solve(lu_factor(a), b)


def sym_eig(a):
    """Eigenpairs of a symmetric matrix sorted by descending eigenvalue."""
    a = np.asarray(a, dtype=float)
    w, v, sweeps = kernels.jacobi_eigh(0.5 * (a + a.T))
    if sweeps < 0:
        raise ConvergenceError("Jacobi eigenvalue iteration did not converge")
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def svd_thin(m, rank):
    """Rank-``rank`` truncated SVD ``m ~ U diag(S) V^T`` via the smaller Gram matrix.

    Returns ``U`` (rows x rank), ``S`` (rank x rank diagonal) and ``V`` (cols x rank).
    """
    m = as_mat(m)
    rows, cols = m.shape
    if rank < 1 or rank > min(rows, cols):
        raise DimensionError(f"rank {rank} invalid for a {rows}x{cols} matrix")
    wide = rows <= cols
    gram = m @ m.T if wide else m.T @ m
    w, vecs = sym_eig(gram)
    sigma = np.sqrt(np.clip(w[:rank], 0.0, None))
    floor = max(SINGULAR_VALUE_TOL, RELATIVE_SINGULAR_VALUE_TOL * sigma[0])
    if sigma[rank - 1] < floor:
        raise RankDeficiencyError(
            f"singular value {rank} is {sigma[rank - 1]:.3e}, below {floor:.3e}"
        )
    basis = vecs[:, :rank]
    if wide:
        u = basis
        v = (m.T @ u) / sigma
    else:
        v = basis
        u = (m @ v) / sigma
    return u, np.diag(sigma), v


def _eig2(m):
    a, b = m[0]
    c, d = m[1]
    half_tr = 0.5 * (a + d)
    disc = cmath.sqrt(half_tr * half_tr - (a * d - b * c))
    l1, l2 = half_tr + disc, half_tr - disc
    vals = np.array([l1, l2], dtype=complex)
    vecs = np.zeros((2, 2), dtype=complex)
    for k, lam in enumerate(vals):
        # two candidate null vectors of m - lam I; keep the better scaled one
        c1 = np.array([b, lam - a], dtype=complex)
        c2 = np.array([lam - d, c], dtype=complex)
        vec = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
        nrm = np.linalg.norm(vec)
        if nrm < 1e-300:
            vec = np.eye(2, dtype=complex)[k]
            nrm = 1.0
        vecs[:, k] = vec / nrm
    if abs(l1 - l2) <= 1e-14 * max(1.0, abs(l1)) and b == 0.0 and c == 0.0:
        vecs = np.eye(2, dtype=complex)
    return vals, vecs


def hessenberg(m):
    """Householder reduction ``m = Q H Q^T`` with ``H`` upper Hessenberg."""
    h = np.array(m, dtype=float)
    n = h.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        h[k + 1:, :] -= 2.0 * np.outer(v, v @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v)
    return h, q


def _schur_qr(h, q, max_iter):
    """Complex shifted QR on a Hessenberg matrix; returns triangular T and Z with h = Z T Z^H."""
    t = h.astype(complex)
    z = q.astype(complex)
    n = t.shape[0]
    hi = n - 1
    iters = 0
    since_deflation = 0
    while hi > 0:
        # look for a negligible subdiagonal
        lo = hi
        while lo > 0:
            s = abs(t[lo - 1, lo - 1]) + abs(t[lo, lo])
            if s == 0.0:
                s = np.abs(t).max()
            if abs(t[lo, lo - 1]) <= 1e-15 * s:
                t[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            since_deflation = 0
            continue
        iters += 1
        since_deflation += 1
        if iters > max_iter:
            raise ConvergenceError(f"QR iteration did not converge in {max_iter} sweeps")
        # Wilkinson shift from the trailing 2x2 block
        a, b = t[hi - 1, hi - 1], t[hi - 1, hi]
        c, d = t[hi, hi - 1], t[hi, hi]
        tr = 0.5 * (a + d)
        disc = cmath.sqrt(tr * tr - (a * d - b * c))
        mu1, mu2 = tr + disc, tr - disc
        mu = mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2
        if since_deflation % 11 == 10:
            mu = d + 0.75 * abs(t[hi, hi - 1])  # exceptional shift
        rots = []
        for k in range(lo, hi + 1):
            t[k, k] -= mu
        for k in range(lo, hi):
            x, y = t[k, k], t[k + 1, k]
            r = math.hypot(abs(x), abs(y))
            if r == 0.0:
                cs, sn = 1.0, 0.0
            else:
                cs, sn = x / r, y / r
            g = np.array([[cs.conjugate(), sn.conjugate()], [-sn, cs]])
            t[k:k + 2, k:] = g @ t[k:k + 2, k:]
            rots.append((k, g))
        for k, g in rots:
            t[:hi + 1, k:k + 2] = t[:hi + 1, k:k + 2] @ g.conj().T
            z[:, k:k + 2] = z[:, k:k + 2] @ g.conj().T
        for k in range(lo, hi + 1):
            t[k, k] += mu
    return t, z


def _triangular_eigvecs(t):
    n = t.shape[0]
    vecs = np.zeros((n, n), dtype=complex)
    scale = max(np.abs(t).max(), 1e-300)
    for k in range(n):
        lam = t[k, k]
        y = np.zeros(n, dtype=complex)
        y[k] = 1.0
        for i in range(k - 1, -1, -1):
            denom = t[i, i] - lam
            if abs(denom) < 1e-14 * scale:
                denom = 1e-14 * scale
            y[i] = -(t[i, i + 1:k + 1] @ y[i + 1:k + 1]) / denom
        vecs[:, k] = y
    return vecs


def eig_small(m):
    """Eigenvalues and eigenvectors of a small real square matrix.

    Returns ``(values, vectors)`` as complex arrays with unit-norm columns,
    ``m @ vectors ~ vectors @ diag(values)``.
    """
    m = as_mat(m)
    n, k = m.shape
    if n != k:
        raise DimensionError(f"eig_small needs a square matrix, got {m.shape}")
    if n > 16:
        raise DimensionError("eig_small is limited to dimension 16")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix has non-finite entries")
    if n == 1:
        return np.array([complex(m[0, 0])]), np.ones((1, 1), dtype=complex)
    if n == 2:
        return _eig2(m)
    h, q = hessenberg(m)
    t, z = _schur_qr(h, q, 100 * n)
    values = np.diag(t).copy()
    vecs = z @ _triangular_eigvecs(t)
    vecs /= np.linalg.norm(vecs, axis=0)
    # snap near-conjugate pairs of a real matrix onto exact conjugates
    values = _symmetrize_conjugates(values)
    return values, vecs


def _symmetrize_conjugates(values):
    out = values.copy()
    used = np.zeros(len(values), dtype=bool)
    scale = max(1.0, np.abs(values).max())
    for i, v in enumerate(values):
        if used[i]:
            continue
        used[i] = True
        if abs(v.imag) <= 1e-12 * scale:
            out[i] = complex(v.real, 0.0)
            continue
        best, dist = None, np.inf
        for j in range(len(values)):
            if not used[j]:
                dj = abs(values[j] - v.conjugate())
                if dj < dist:
                    best, dist = j, dj
        if best is not None and dist <= 1e-8 * scale:
            used[best] = True
            re = 0.5 * (v.real + values[best].real)
            im = 0.5 * (v.imag - values[best].imag)
            out[i] = complex(re, im)
            out[best] = complex(re, -im)
    return out
