"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the two hot paths: a batched RK4 rollout (10 episodes x 200 steps of
Van der Pol) and the Jacobi eigensolver on the 10 x 10 Hankel Gram matrix.
"""
import argparse
import timeit

import numpy as np

from koopctl import dmd, dynamics, kernels
from koopctl.diffnum import linalg


def rollout():
    spec = dynamics.make_system("vdp")
    plant = spec.plant(list(range(10)))
    plant.reset()
    u = np.zeros(10)
    for _ in range(199):
        plant.step(u)


def make_gram():
    y = dynamics.rollout_random(dynamics.make_system("vdp"), 200, 0).measurements
    h1, _ = dmd.hankel_pair(y, 5)
    return h1 @ h1.T


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    gram = make_gram()
    cases = {
        "rk4 rollout (10x200)": (rollout, 5),
        "jacobi 10x10": (lambda: linalg.sym_eig(gram), 200),
    }
    backends = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the Python fallback only")
    previous = kernels.backend_name()
    print(f"{'case':<24}" + "".join(f"{b:>14}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    try:
        for name, (fn, number) in cases.items():
            times = []
            for b in backends:
                kernels.use_backend(b)
                best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
                times.append(best)
            row = f"{name:<24}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>11.1f}x"
            print(row)
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    main()
