# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np

from libc.math cimport sqrt, fabs, copysign

cdef enum:
    MAX_DIM = 4


cdef inline void _field(int kind, const double[:] p, double* x, double u,
                        double* out) noexcept nogil:
    if kind == 0:
        out[0] = x[1]
        out[1] = p[0] * x[1] * (1.0 - x[0] * x[0]) - p[1] * x[0] + u
    elif kind == 1:
        out[0] = x[0] - x[0] * x[0] * x[0] / 3.0 - x[1] + p[3]
        out[1] = p[2] * (x[0] - p[0] - p[1] * x[1]) + u
    elif kind == 2:
        out[0] = x[1]
        out[1] = p[1] * x[0] - p[0] * x[0] * x[0] * x[0] - p[2] * x[1] + u
    elif kind == 3:
        out[0] = -x[1] - x[0]
        out[1] = x[0] - p[0] * x[1] + u
        out[2] = p[1] + x[0] * x[2] - p[2] * x[2]
    else:
        out[0] = -x[1] - x[2]
        out[1] = x[0] + p[0] * x[1] + u
        out[2] = p[1] + x[2] * (x[0] - p[2])


def rk4_integrate(int kind, params, double[:, ::1] x, u, double h, int substeps):
    """Advance ``x`` in place by ``substeps`` RK4 steps of size ``h``."""
    if kind < 0 or kind > 4:
        raise ValueError(f"unknown vector field code {kind}")
    cdef const double[:] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[:] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    if d > MAX_DIM:
        raise ValueError("state dimension too large for compiled kernel")
    cdef double k1[MAX_DIM]
    cdef double k2[MAX_DIM]
    cdef double k3[MAX_DIM]
    cdef double k4[MAX_DIM]
    cdef double xs[MAX_DIM]
    cdef double tmp[MAX_DIM]
    cdef Py_ssize_t i, j
    cdef int s
    cdef double ui
    with nogil:
        for i in range(n):
            ui = uu[i]
            for j in range(d):
                xs[j] = x[i, j]
            for s in range(substeps):
                _field(kind, p, xs, ui, k1)
                for j in range(d):
                    tmp[j] = xs[j] + 0.5 * h * k1[j]
                _field(kind, p, tmp, ui, k2)
                for j in range(d):
                    tmp[j] = xs[j] + 0.5 * h * k2[j]
                _field(kind, p, tmp, ui, k3)
                for j in range(d):
                    tmp[j] = xs[j] + h * k3[j]
                _field(kind, p, tmp, ui, k4)
                for j in range(d):
                    xs[j] = xs[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for j in range(d):
                x[i, j] = xs[j]
    return np.asarray(x)


def jacobi_eigh(a_in, double tol=1e-15, int max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix."""
    cdef double[:, ::1] a = np.array(a_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = a.shape[0]
    v_arr = np.eye(n)
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t i, j, p, q, k
    cdef double scale = 0.0, off, apq, theta, t, c, s, x1, x2
    cdef int sweep
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = sqrt(scale)
    if scale == 0.0:
        return np.zeros(n), v_arr, 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if sqrt(2.0 * off) <= tol * scale:
            return np.diag(np.asarray(a)).copy(), v_arr, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    x1 = a[k, p]
                    x2 = a[k, q]
                    a[k, p] = c * x1 - s * x2
                    a[k, q] = s * x1 + c * x2
                for k in range(n):
                    x1 = a[p, k]
                    x2 = a[q, k]
                    a[p, k] = c * x1 - s * x2
                    a[q, k] = s * x1 + c * x2
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    x1 = v[k, p]
                    x2 = v[k, q]
                    v[k, p] = c * x1 - s * x2
                    v[k, q] = s * x1 + c * x2
    return np.diag(np.asarray(a)).copy(), v_arr, -1
