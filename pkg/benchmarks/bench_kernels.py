"""Compare the numba and numpy kernel backends on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once first so JIT compilation is excluded from timings.
"""

import argparse
import time

import numpy as np

from resq._kernels import get_backend
from resq.model import NotchModelParams, s21_notch


def _workloads(rng):
    p = NotchModelParams.from_internal(6e9, 1e6, 1e5, 0.2, 1.0, 0.3, 4e-8)
    f = p.f_r + np.linspace(-0.5, 0.5, 1001) * 20 * p.f_r / p.q_l
    z = s21_notch(p, f)
    f_rel = f - f.mean()
    x = np.cos(np.linspace(0, 2 * np.pi, 1001)) + 1e-3 * rng.standard_normal(1001)
    y = np.sin(np.linspace(0, 2 * np.pi, 1001)) + 1e-3 * rng.standard_normal(1001)
    pv_x = np.linspace(10, 30, 2001)
    steps = np.r_[np.zeros(2000), np.ones(2000), 2 * np.ones(2000)] + 0.1 * rng.standard_normal(6000)
    vec = np.array([p.f_r, p.q_l, p.q_c_mag, p.phi, p.a, 0.3, p.tau])
    return {
        "delay_scan (4000 tau x 1001 pts)": lambda k: k.delay_scan(f_rel, z.real.copy(), z.imag.copy(),
                                                                    0.0, 1e-11, 4000),
        "taubin_circle (1001 pts)": lambda k: k.taubin_circle(x, y),
        "notch_residuals + jac (1001 pts)": lambda k: k.notch_residuals(vec, f, z.real.copy(),
                                                                         z.imag.copy(), f.mean(), True),
        "pseudo_voigt + jac (2001 pts)": lambda k: k.pseudo_voigt(pv_x, 20.0, 1.4, 0.4, 1.0, 0.01, True),
        "best_split (6000 pts)": lambda k: k.best_split(steps, 0, steps.size, 5),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    work = _workloads(rng)
    backends = {name: get_backend(name) for name in ("numpy", "numba")}
    print(f"{'kernel':40s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for label, fn in work.items():
        times = {}
        for name, k in backends.items():
            fn(k)  # warm-up / JIT
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                fn(k)
                best = min(best, time.perf_counter() - t0)
            times[name] = best * 1e3
        print(f"{label:40s} {times['numpy']:12.3f} {times['numba']:12.3f} "
              f"{times['numpy'] / times['numba']:8.1f}x")


if __name__ == "__main__":
    main()
