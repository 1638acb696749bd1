"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--nr 96] [--ntheta 192] [--probes 10000] [--repeat 5]

Both backends are imported directly, so ``DCONE_LAB_BACKEND`` has no effect
here. Numba compilation happens in a warm-up call and is reported separately.
"""
import argparse
import time
import timeit

import numpy as np

from dcone_lab import BoundaryProfile, SmoothedCone, ansatz_state, boundary_curve, build_trace, sweep_grid
from dcone_lab.energy import _kernel_args
from dcone_lab.kernels import _numba as nbk
from dcone_lab.kernels import _numpy as npk


def cases(nr, ntheta, n_probes, rng):
    trace = build_trace(BoundaryProfile.preset("paper-default"))
    grid = sweep_grid(nr, ntheta, 0.0125, 2.5)
    state = ansatz_state(SmoothedCone(trace, 0.05, 2.5), grid)
    state = state.with_dofs(state.dofs() + 1e-3 * rng.standard_normal(state.n_dofs))
    args = _kernel_args(state)
    v = state.extended("v")
    curve = boundary_curve(trace.beta)
    px, py = curve.points[:, 0], curve.points[:, 1]
    lo, hi = curve.bbox()
    z = rng.uniform(lo, hi, size=(n_probes, 2))
    g = grid
    return {
        f"energy_and_gradient {nr}x{ntheta}": lambda k: k.energy_and_gradient(*args, 0.05, 2.5),
        f"polar_partials {nr}x{ntheta}": lambda k: k.polar_partials(v, g.d1, g.d2, g.a1, g.a2),
        f"winding_sums {n_probes} probes x {len(px)} vertices": lambda k: k.winding_sums(px, py, z[:, 0], z[:, 1]),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nr", type=int, default=96)
    ap.add_argument("--ntheta", type=int, default=192)
    ap.add_argument("--probes", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':<48} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'jit [s]':>8}")
    for name, fn in cases(args.nr, args.ntheta, args.probes, rng).items():
        t0 = time.perf_counter()
        fn(nbk)  # compile
        jit = time.perf_counter() - t0
        fn(npk)
        best = {}
        for label, k in (("numpy", npk), ("numba", nbk)):
            timer = timeit.Timer(lambda k=k: fn(k))
            n, _ = timer.autorange()
            best[label] = min(timer.repeat(args.repeat, n)) / n * 1e3
        print(f"{name:<48} {best['numpy']:>11.3f} {best['numba']:>11.3f} {best['numpy'] / best['numba']:>7.1f}x {jit:>8.2f}")


if __name__ == "__main__":
    main()
