import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from koopctl import pole
from koopctl.diffnum import tape as ad
from koopctl.errors import ConfigError, ConjugacyError, UncontrollableError
from koopctl.pole import TargetSpectrum

from conftest import central_diff, rel_err


def random_target(rng, k):
    vals = []
    while len(vals) < k:
        if k - len(vals) >= 2 and rng.random() < 0.6:
            z = rng.uniform(0.05, 1.0) * np.exp(1j * rng.uniform(0.05, np.pi - 0.05))
            vals += [z, z.conjugate()]
        else:
            vals.append(rng.uniform(-1.0, 1.0))
    return TargetSpectrum(vals)


def random_controllable(rng, k, max_cond=1e8):
    while True:
        A = rng.normal(size=(k, k)) / np.sqrt(k)
        B = rng.normal(size=(k, 1))
        if np.linalg.cond(pole.controllability(A, B)) <= max_cond:
            return A, B


class TestCharCoeffs:
    def test_zero_roots(self):
        assert np.array_equal(pole.char_coeffs([0, 0]), [0, 0])

    def test_double_root(self):
        assert np.allclose(pole.char_coeffs([1, 1]), [-2, 1])

    def test_unit_pair(self):
        beta = pole.char_coeffs(TargetSpectrum.from_polar(1.0, 0.2))
        assert np.allclose(beta, [-2 * np.cos(0.2), 1.0], atol=1e-15)

    def test_damped_pair(self):
        beta = pole.char_coeffs(TargetSpectrum.from_polar(0.92, 0.2))
        assert beta == pytest.approx([-1.8033225, 0.8464], abs=1e-7)

    def test_not_conjugate_closed(self):
        with pytest.raises(ConjugacyError):
            pole.char_coeffs([1j, 0.5])

    def test_round_trip(self, rng):
        for k in (1, 2, 3, 4):
            for _ in range(25):
                target = random_target(rng, k)
                roots = np.roots(np.r_[1.0, pole.char_coeffs(target)])
                # greedy matching of the recovered multiset
                assert pole.match_eigenvalues(target.values, roots).max() <= 1e-8


class TestTargetSpectrum:
    def test_from_polar(self):
        t = TargetSpectrum.from_polar(1.0, 0.2)
        assert np.allclose(sorted(t.values, key=np.imag), [np.exp(-0.2j), np.exp(0.2j)])
        assert np.array_equal(TargetSpectrum.from_polar(1.0, 0.0).values, [1.0, 1.0])

    def test_validation(self):
        with pytest.raises(ConfigError):
            TargetSpectrum([1.5])
        with pytest.raises(ConjugacyError):
            TargetSpectrum([0.5j])
        with pytest.raises(ConfigError):
            TargetSpectrum.from_polar(0.0, 0.1)
        with pytest.raises(ConfigError):
            TargetSpectrum.from_polar(1.0, np.pi)

    def test_json_round_trip(self):
        t = TargetSpectrum.from_polar(0.96, 0.2)
        assert np.array_equal(TargetSpectrum.from_json(t.to_json()).values, t.values)


class TestControllability:
    def test_uncontrollable(self):
        C = pole.controllability(np.eye(2), np.array([[1.0], [0.0]]))
        assert np.array_equal(C, [[1, 1], [0, 0]])

    def test_double_integrator(self):
        C = pole.controllability(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))
        assert np.array_equal(C, [[0, 1], [1, 0]])

    def test_iterated_multiply(self, rng):
        A, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 1))
        C = pole.controllability(A, B)
        col = B
        for j in range(4):
            assert np.allclose(C[:, j:j + 1], col)
            col = A @ col


class TestCharPolyAt:
    def test_cayley_hamilton(self, rng):
        A = rng.normal(size=(3, 3))
        beta = pole.char_coeffs(np.linalg.eigvals(A), tol=1e-8)
        assert np.max(np.abs(pole.char_poly_at(A, beta))) <= 1e-12

    def test_zero_matrix(self):
        assert np.array_equal(pole.char_poly_at(np.zeros((2, 2)), [0.0, 3.0]), 3 * np.eye(2))

    def test_explicit_powers(self, rng):
        A = rng.normal(size=(3, 3))
        beta = rng.normal(size=3)
        naive = np.linalg.matrix_power(A, 3) + sum(
            b * np.linalg.matrix_power(A, 3 - k) for k, b in enumerate(beta, start=1))
        assert np.max(np.abs(pole.char_poly_at(A, beta) - naive)) <= 1e-12


class TestAckermann:
    def test_double_integrator(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        F = pole.ackermann(A, B, TargetSpectrum([0.5, 0.5]))
        assert np.allclose(F, [[0.25, -1.0]])
        vals = np.linalg.eigvals(pole.closed_loop(A, B, F))
        assert np.allclose(vals, [0.5, 0.5], atol=1e-7)

    def test_own_spectrum_is_fixed_point(self, rng):
        A, B = random_controllable(rng, 3)
        A = 0.9 * A / np.max(np.abs(np.linalg.eigvals(A)))
        own = np.linalg.eigvals(A)
        F = pole.ackermann(A, B, TargetSpectrum(own))
        got = np.linalg.eigvals(pole.closed_loop(A, B, F))
        assert pole.match_eigenvalues(own, got).max() <= 1e-8

    def test_random_placements(self, rng):
        worst = 0.0
        for i in range(300):
            k = 2 + i % 3
            A, B = random_controllable(rng, k)
            target = random_target(rng, k)
            F = pole.ackermann(A, B, target)
            got = np.linalg.eigvals(pole.closed_loop(A, B, F))
            worst = max(worst, pole.match_eigenvalues(target.values, got).max())
        assert worst <= 1e-6

    def test_uncontrollable_raises_in_eval(self):
        A, B = np.eye(2), np.array([[1.0], [0.0]])
        with pytest.raises(UncontrollableError):
            pole.ackermann(A, B, TargetSpectrum([0.5, 0.5]))
        F = pole.ackermann(A, B, TargetSpectrum([0.5, 0.5]), training=True)
        assert np.all(np.isfinite(F))

    def test_gradient_matches_finite_differences(self, rng):
        target = TargetSpectrum.from_polar(0.95, 0.25)
        probe = rng.normal(size=(1, 2))
        for _ in range(5):
            A, B = random_controllable(rng, 2, max_cond=1e3)

            def f(a, b):
                return float(np.sum(probe * pole.ackermann(a, b, target)))

            t = ad.Tape()
            la, lb = t.leaf(A), t.leaf(B)
            t.backward(ad.sum_all(ad.mul(pole.ackermann(la, lb, target), probe)))
            assert rel_err(la.grad, central_diff(lambda a: f(a, B), A)) <= 1e-4
            assert rel_err(lb.grad, central_diff(lambda b: f(A, b), B)) <= 1e-4

    def test_ridge_path_gradient(self, rng):
        # C exactly singular: the training path must stay differentiable
        A = np.diag([0.9, 0.9])
        B = np.array([[0.05], [-0.07]])
        target = TargetSpectrum.from_polar(1.0, 0.1)
        t = ad.Tape()
        la, lb = t.leaf(A), t.leaf(B)
        t.backward(ad.sum_all(pole.ackermann(la, lb, target, training=True)))
        assert np.all(np.isfinite(la.grad)) and np.all(np.isfinite(lb.grad))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 3.0), st.integers(0, 2**31))
def test_placement_property(modulus, arg, seed):
    rng = np.random.default_rng(seed)
    A, B = random_controllable(rng, 2, max_cond=1e4)
    target = TargetSpectrum.from_polar(modulus, arg)
    got = np.linalg.eigvals(pole.closed_loop(A, B, pole.ackermann(A, B, target)))
    assert pole.match_eigenvalues(target.values, got).max() <= 1e-6
