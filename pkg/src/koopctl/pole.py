"""Single-input pole placement by Ackermann's formula, differentiable in (A, B).

All functions accept plain arrays or tape :class:`~koopctl.diffnum.Var` values;
with Vars the result is recorded on the tape.
"""
import numpy as np

from .diffnum import tape as ad
from .errors import ConfigError, ConjugacyError, DimensionError, SingularMatrixError, UncontrollableError

RIDGE = 1e-8


class TargetSpectrum:
    """Conjugate-closed set of target eigenvalues inside the closed unit disk."""

    def __init__(self, eigenvalues, tol=1e-9):
        vals = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
        if vals.size < 1:
            raise ConfigError("target spectrum is empty")
        if np.any(np.abs(vals) > 1.0 + 1e-9):
            raise ConfigError("target eigenvalues must satisfy |lambda| <= 1")
        if not _conjugate_closed(vals, tol):
            raise ConjugacyError("target spectrum is not closed under conjugation")
        self.values = vals

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __repr__(self):
        return f"TargetSpectrum({list(self.values)!r})"

    @classmethod
    def from_polar(cls, modulus, argument):
        """Conjugate pair ``modulus * exp(+-i argument)``; argument 0 gives a real double root."""
        modulus = float(modulus)
        argument = float(argument)
        if not 0.0 < modulus <= 1.0:
            raise ConfigError(f"target modulus must lie in (0, 1], got {modulus}")
        if not 0.0 <= argument < np.pi:
            raise ConfigError(f"target argument must lie in [0, pi), got {argument}")
        lam = modulus * np.exp(1j * argument)
        if argument == 0.0:
            lam = complex(modulus, 0.0)
        return cls([lam, np.conj(lam)])

    def to_json(self):
        return [{"re": float(v.real), "im": float(v.imag)} for v in self.values]

    @classmethod
    def from_json(cls, items):
        return cls([complex(d["re"], d["im"]) for d in items])


def _conjugate_closed(vals, tol):
    remaining = list(vals)
    while remaining:
        v = remaining.pop(0)
        if abs(v.imag) <= tol:
            continue
        dists = [abs(w - np.conj(v)) for w in remaining]
        if not dists or min(dists) > tol:
            return False
        remaining.pop(int(np.argmin(dists)))
    return True


def char_coeffs(eigenvalues, tol=1e-10):
    """Real coefficients ``beta_1..beta_K`` of ``prod(s - lambda_k) = s^K + sum beta_k s^(K-k)``."""
    vals = eigenvalues.values if isinstance(eigenvalues, TargetSpectrum) else np.atleast_1d(eigenvalues)
    poly = [1.0 + 0.0j]
    for lam in vals:
        nxt = poly + [0.0j]
        for i in range(1, len(nxt)):
            nxt[i] -= lam * poly[i - 1]
        poly = nxt
    coeffs = np.array(poly[1:], dtype=complex)
    residue = np.abs(coeffs.imag).max() if coeffs.size else 0.0
    if residue > tol:
        raise ConjugacyError(f"characteristic polynomial has imaginary residue {residue:.3e}")
    return coeffs.real.copy()


def controllability(A, B):
    """``[B, AB, ..., A^(K-1) B]``."""
    k = ad.value(A).shape[0]
    if ad.value(A).shape != (k, k) or ad.value(B).shape[0] != k:
        raise DimensionError(f"incompatible shapes A {ad.value(A).shape}, B {ad.value(B).shape}")
    cols = [B]
    for _ in range(k - 1):
        cols.append(ad.matmul(A, cols[-1]))
    return ad.hstack(cols)


def char_poly_at(A, beta):
    """``A^K + sum_k beta_k A^(K-k)`` by Horner's rule on matrices."""
    k = ad.value(A).shape[0]
    if ad.value(A).shape != (k, k):
        raise DimensionError("char_poly_at needs a square matrix")
    beta = np.asarray(beta, dtype=float)
    eye = np.eye(k)
    out = eye
    for b in beta:
        out = ad.add(ad.matmul(A, out), b * eye)
    return out


def ackermann(A, B, target, training=False):
    """Gain ``F`` (1 x K) placing the eigenvalues of ``A - B F`` at ``target``.

    In training mode a near-singular controllability matrix is handled with
    ridge-stabilised normal equations instead of raising UncontrollableError.
    """
    vals = target.values if isinstance(target, TargetSpectrum) else np.atleast_1d(target)
    k = ad.value(A).shape[0]
    if ad.value(B).shape != (k, 1):
        raise DimensionError(f"B must be {k}x1 for single-input placement, got {ad.value(B).shape}")
    if len(vals) != k:
        raise DimensionError(f"{len(vals)} target eigenvalues for a {k}-dimensional model")
    beta = char_coeffs(vals)
    C = controllability(A, B)
    delta = char_poly_at(A, beta)
    try:
        x = ad.solve(C, delta)
    except SingularMatrixError as exc:
        if not training:
            raise UncontrollableError(f"controllability matrix is singular ({exc})") from exc
        ct = ad.transpose(C)
        x = ad.solve(ad.add_identity(ad.matmul(ct, C), RIDGE), ad.matmul(ct, delta))
    return ad.row(x, k - 1)


def closed_loop(A, B, F):
    return np.asarray(A) - np.asarray(B) @ np.asarray(F)


def match_eigenvalues(target, estimate):
    """Greedy minimal-distance pairing; returns the matched distances."""
    target = list(np.asarray(target, dtype=complex))
    remaining = list(np.asarray(estimate, dtype=complex))
    pairs = sorted(
        ((abs(t - e), i, j) for i, t in enumerate(target) for j, e in enumerate(remaining)),
        key=lambda p: p[0],
    )
    used_t, used_e, dists = set(), set(), []
    for d, i, j in pairs:
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
        dists.append(d)
    return np.array(dists)
