"""Time the interpreted and numba-compiled kernels on identical inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Compilation happens on a warm-up call that is excluded from the timings.
"""

import argparse
import json
import time

import numpy as np

from oscillametric import _kernels as K


def cases():
    rng = np.random.default_rng(0)
    x0 = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    xd0 = np.array([1.0, 0.0, 0.9, 0.0, 0.0, 0.0])
    f = np.zeros((6, 6))
    f[1, 2], f[2, 1] = 1.0, -1.0
    x_low = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0])
    g0 = np.array([-1.0, 1, 1, 1, -1, 1])
    n = 512
    x = np.arange(n) - n / 2
    psi = np.exp(-x**2 / 800 + 0.1j * x)
    vpot = np.zeros(n)
    lam = rng.uniform(0, 2 * np.pi, 200_000)
    u, dens = rng.random(1 << 18), rng.random(1 << 18)
    return {
        "newtonian_rk4 (20k steps)": lambda ns: ns.newtonian_rk4(x0, xd0, 1.0, np.zeros(3), 1e-3, 20_000, 100),
        "em_uniform_rk4 (20k steps)": lambda ns: ns.em_uniform_rk4(np.zeros(6), xd0, f, x_low, g0, 1e-3, 20_000, 100),
        "kg_leapfrog (512 x 200)": lambda ns: ns.kg_leapfrog(psi, psi, vpot, 1.0, 1.0, 0.5, 200),
        "cn_schrodinger (512 x 200)": lambda ns: ns.cn_schrodinger(psi, vpot, 1.0, 1.0, 0.5, 200),
        "lhv_products (200k)": lambda ns: ns.lhv_products(lam, np.array([0.0, 1.57]), np.array([0.78, -0.78])),
        "accept_mask (262k)": lambda ns: ns.accept_mask(u, dens, 1.0),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json")
    args = ap.parse_args()
    if K.NB is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rows = []
    print(f"{'kernel':30s} {'python [s]':>12s} {'numba [s]':>12s} {'speed-up':>10s}")
    for name, run in cases().items():
        run(K.NB)  # compile
        py = best_of(lambda: run(K.PY), 1 if "rk4" in name else args.repeat)
        nb = best_of(lambda: run(K.NB), args.repeat)
        rows.append({"kernel": name, "python_s": py, "numba_s": nb, "speedup": py / nb})
        print(f"{name:30s} {py:12.4f} {nb:12.6f} {py / nb:10.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
