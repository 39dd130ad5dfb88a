"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built; otherwise the pure-Python
implementations are used transparently. ``use_backend`` switches explicitly,
which the test-suite and the benchmark rely on.
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

VAN_DER_POL = _pykernels.VAN_DER_POL
FITZHUGH_NAGUMO = _pykernels.FITZHUGH_NAGUMO
DUFFING = _pykernels.DUFFING
ROSSLER_PRINTED = _pykernels.ROSSLER_PRINTED
ROSSLER_STANDARD = _pykernels.ROSSLER_STANDARD

_backend = _ckernels if _ckernels is not None else _pykernels


def compiled_available():
    return _ckernels is not None


def backend_name():
    return "compiled" if _backend is _ckernels else "python"


def use_backend(name):
    """Select ``"compiled"`` or ``"python"`` kernels; returns the previous name."""
    global _backend
    previous = backend_name()
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        _backend = _ckernels
    elif name == "python":
        _backend = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def rk4_integrate(kind, params, x, u, h, substeps):
    return _backend.rk4_integrate(kind, params, x, u, h, substeps)


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    return _backend.jacobi_eigh(a, tol, max_sweeps)
