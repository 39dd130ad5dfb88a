"""Koopman pole-placement control of black-box nonlinear systems."""
from .dmd import HankelConfig, estimate_eigs, hankel_pair
from .dynamics import LinearSystemSpec, SystemSpec, Trajectory, make_system, rollout_random
from .pole import TargetSpectrum, ackermann, char_coeffs, char_poly_at, controllability
from .policy import KoopmanModel, KoopmanPolicy, MLPPolicy
from .train import TrainConfig, spectral_reward

__version__ = "0.1.0"

__all__ = [
    "HankelConfig", "estimate_eigs", "hankel_pair",
    "LinearSystemSpec", "SystemSpec", "Trajectory", "make_system", "rollout_random",
    "TargetSpectrum", "ackermann", "char_coeffs", "char_poly_at", "controllability",
    "KoopmanModel", "KoopmanPolicy", "MLPPolicy",
    "TrainConfig", "spectral_reward",
]
