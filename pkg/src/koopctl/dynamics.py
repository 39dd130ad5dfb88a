"""Black-box controlled plants: four ODE systems plus an exact linear plant.

Plants are batched: one :class:`Plant` advances ``n`` independent episodes,
each with its own random stream, so episode ``i`` of a batch is identical to
running that episode alone with the same seed.
"""
import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError, InputError

SYSTEM_NAMES = ("vdp", "fhn", "duffing", "rossler")

_ALIASES = {
    "vanderpol": "vdp",
    "van_der_pol": "vdp",
    "fitzhughnagumo": "fhn",
    "fitzhugh_nagumo": "fhn",
}


@dataclass(frozen=True)
class SystemSpec:
    """A continuous-time controlled ODE sampled every ``dt`` time units."""

    kind: str
    params: dict
    state_dim: int
    state_bounds: tuple
    control_bounds: tuple
    noise_std: float = 1e-2
    dt: float = 0.1
    substeps: int = 4
    init_box: tuple = (-2.0, 2.0)
    rossler_standard: bool = False

    def __post_init__(self):
        if self.kind not in SYSTEM_NAMES:
            raise ConfigError(f"unknown system kind {self.kind!r}")
        lo, hi = self.control_bounds
        if not (lo < hi and math.isclose(lo, -hi)):
            raise ConfigError(f"control bounds must be symmetric and nonempty, got {self.control_bounds}")
        slo, shi = self.state_bounds
        if not slo < shi:
            raise ConfigError(f"state bounds must be nonempty, got {self.state_bounds}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.dt <= 0 or self.substeps < 1:
            raise ConfigError("dt must be > 0 and substeps >= 1")
        ilo, ihi = self.init_box
        if ilo > ihi:
            raise ConfigError(f"init box is empty: {self.init_box}")

    @property
    def measurement_dim(self):
        return self.state_dim

    @property
    def kernel_code(self):
        if self.kind == "vdp":
            return kernels.VAN_DER_POL
        if self.kind == "fhn":
            return kernels.FITZHUGH_NAGUMO
        if self.kind == "duffing":
            return kernels.DUFFING
        return kernels.ROSSLER_STANDARD if self.rossler_standard else kernels.ROSSLER_PRINTED

    @property
    def param_vector(self):
        order = {
            "vdp": ("a", "b"),
            "fhn": ("a", "b", "c", "I"),
            "duffing": ("a", "b", "c"),
            "rossler": ("a", "b", "c"),
        }[self.kind]
        return np.array([float(self.params[k]) for k in order])

    def plant(self, seeds):
        return Plant(self, seeds)


def make_system(name, **overrides):
    """Preset system with the coefficients and bounds used in the experiments."""
    key = _ALIASES.get(name.lower().replace("-", "_"), name.lower())
    if key == "vdp":
        spec = SystemSpec("vdp", {"a": 1.0, "b": 1.0}, 2, (-10.0, 10.0), (-5.0, 5.0))
    elif key == "fhn":
        spec = SystemSpec("fhn", {"a": 0.7, "b": 0.8, "c": 0.08, "I": 0.8}, 2,
                          (-10.0, 10.0), (-5.0, 5.0))
    elif key == "duffing":
        spec = SystemSpec("duffing", {"a": 1.0, "b": -1.0, "c": 0.5}, 2,
                          (-5.0, 5.0), (-10.0, 10.0))
    elif key == "rossler":
        spec = SystemSpec("rossler", {"a": 0.2, "b": 0.2, "c": 5.7}, 3,
                          (-20.0, 20.0), (-10.0, 10.0))
    else:
        raise ConfigError(f"unknown system {name!r}; choose from {', '.join(SYSTEM_NAMES)}")
    if "params" in overrides:
        overrides["params"] = {**spec.params, **overrides["params"]}
    for key_ in ("state_bounds", "control_bounds", "init_box"):
        if key_ in overrides:
            overrides[key_] = tuple(float(v) for v in overrides[key_])
    try:
        return replace(spec, **overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class LinearSystemSpec:
    """Discrete-time linear plant ``x' = A x + B u`` observed as ``y = x + noise``."""

    A: np.ndarray
    B: np.ndarray
    control_bounds: tuple = (-1e6, 1e6)
    state_bounds: tuple = (-1e6, 1e6)
    noise_std: float = 0.0
    init_box: tuple = (-2.0, 2.0)
    kind: str = field(default="linear")

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.B, dtype=float).reshape(a.shape[0], -1)
        if a.shape[0] != a.shape[1] or b.shape[1] != 1:
            raise DimensionError(f"need square A and single-column B, got {a.shape}, {b.shape}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def measurement_dim(self):
        return self.A.shape[0]

    def plant(self, seeds):
        return Plant(self, seeds)


def episode_rngs(seeds):
    return [np.random.default_rng(s) for s in seeds]


class Plant:
    """Batched black-box plant; ``reset`` then repeated ``step``."""

    def __init__(self, spec, seeds):
        self.spec = spec
        if isinstance(seeds, (int, np.integer)):
            seeds = [int(seeds)]
        self.seeds = list(seeds)
        self.n = len(self.seeds)
        self.rngs = episode_rngs(self.seeds)
        self.x = None

    def _measure(self):
        y = self.x.copy()
        std = self.spec.noise_std
        if std > 0:
            for i, rng in enumerate(self.rngs):
                y[i] += rng.normal(0.0, std, size=y.shape[1])
        return y

    def reset(self):
        lo, hi = self.spec.init_box
        d = self.spec.state_dim
        self.x = np.empty((self.n, d))
        for i, rng in enumerate(self.rngs):
            self.x[i] = rng.uniform(lo, hi, size=d)
        return self._measure()

    def step(self, u):
        if self.x is None:
            raise InputError("plant must be reset before stepping")
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size == 1 and self.n > 1:
            u = np.full(self.n, u[0])
        if u.shape != (self.n,):
            raise DimensionError(f"expected {self.n} controls, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InputError("control must be finite")
        lo, hi = self.spec.control_bounds
        u = np.clip(u, lo, hi)
        spec = self.spec
        if isinstance(spec, LinearSystemSpec):
            self.x = self.x @ spec.A.T + np.outer(u, spec.B[:, 0])
        else:
            h = spec.dt / spec.substeps
            self.x = np.ascontiguousarray(self.x)
            kernels.rk4_integrate(spec.kernel_code, spec.param_vector, self.x, u, h, spec.substeps)
        slo, shi = spec.state_bounds
        np.clip(self.x, slo, shi, out=self.x)
        return self._measure()


def reset(spec, seed):
    """Single-episode reset; returns ``(plant, y1)``."""
    plant = Plant(spec, [seed])
    return plant, plant.reset()[0]


def step(plant, u):
    """Single-episode step; returns the next measurement vector."""
    return plant.step(np.array([u], dtype=float))[0]


@dataclass
class Trajectory:
    """Measurements ``y_1..y_T`` (T x D) and the applied controls ``u_1..u_{T-1}``."""

    measurements: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.measurements, dtype=float)
        self.measurements = y[:, None] if y.ndim == 1 else y
        self.controls = np.asarray(self.controls, dtype=float).reshape(-1)
        if len(self.controls) != len(self.measurements) - 1:
            raise DimensionError(
                f"{len(self.measurements)} measurements need {len(self.measurements) - 1} controls"
            )

    @property
    def T(self):
        return self.measurements.shape[0]

    @property
    def D(self):
        return self.measurements.shape[1]


def rollout_random(spec, T, seed):
    """Trajectory driven by i.i.d. uniform controls over the control bounds."""
    if T < 2:
        raise ConfigError("T must be at least 2")
    plant = Plant(spec, [seed])
    ys = [plant.reset()[0]]
    lo, hi = spec.control_bounds
    # controls come from a stream separate from the plant noise
    urng = np.random.default_rng([seed, 1])
    us = urng.uniform(lo, hi, size=T - 1)
    for u in us:
        ys.append(plant.step(np.array([u]))[0])
    return Trajectory(np.array(ys), us)


def collect_random(spec, n, T, seed):
    """``n`` random-control trajectories with per-sequence seeds derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(n)
    return [rollout_random(spec, T, int(s)) for s in seeds]


def trajectory_to_csv(traj, path=None):
    """Write ``t,y1..yD,u1`` rows (17 significant digits); returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"y{d + 1}" for d in range(traj.D)] + ["u1"])
    for t in range(traj.T):
        u = "%.17g" % traj.controls[t] if t < traj.T - 1 else ""
        writer.writerow([t + 1] + ["%.17g" % v for v in traj.measurements[t]] + [u])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def trajectory_from_csv(path_or_text):
    if "\n" in str(path_or_text):
        text = str(path_or_text)
    else:
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputError("empty trajectory CSV")
    header = rows[0]
    ycols = [i for i, h in enumerate(header) if h.startswith("y")]
    ucol = header.index("u1") if "u1" in header else None
    ys, us = [], []
    for r in rows[1:]:
        if not r:
            continue
        ys.append([float(r[i]) for i in ycols])
        if ucol is not None and r[ucol] != "":
            us.append(float(r[ucol]))
    if ucol is None:
        us = [0.0] * (len(ys) - 1)
    return Trajectory(np.array(ys), np.array(us))
