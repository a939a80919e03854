"""Benchmark the compiled kernel core against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--particles N] [--repeats R]

Times the three hot kernels (Euler-Maruyama step, box moments, WENO5
Burgers RHS) plus a short end-to-end particle simulation under both
backends, and verifies they agree bit for bit.
"""

import argparse
import time

import numpy as np

from coarsepde._kernels import HAVE_EXT, pure

TWO_PI = 2.0 * np.pi


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--particles", type=int, default=500_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = {"numpy": pure}
    if HAVE_EXT:
        from coarsepde._kernels import _core
        backends["compiled"] = _core
    else:
        print("compiled extension not available; timing the fallback only")

    rng = np.random.Generator(np.random.Philox(0))
    pos = rng.uniform(0.0, TWO_PI, args.particles)
    noise = 0.01 * rng.standard_normal(args.particles)
    inv_wr = 1.0 / (TWO_PI / 128 * 4e4)
    z = (np.arange(128) + 0.5) * (TWO_PI / 128)
    u = 1.0 - np.cos(2 * z) / 2.0

    cases = {
        "em_step": lambda b: b.em_step(pos, noise, 1e-3, 128, TWO_PI, inv_wr),
        "box_moments(K=6)": lambda b: b.box_moments(pos, 128, TWO_PI,
                                                    2.5e-5, 6),
        "box_counts": lambda b: b.box_counts(pos, 128, TWO_PI),
        "burgers_rhs(n=128)": lambda b: b.burgers_rhs(u, TWO_PI / 128, 0.05),
    }

    print(f"{args.particles} particles, best of {args.repeats} runs\n")
    print(f"{'kernel':<20}" + "".join(f"{name:>14}" for name in backends)
          + f"{'speedup':>10}")
    for label, call in cases.items():
        times = {name: _time(lambda b=b: call(b), args.repeats)
                 for name, b in backends.items()}
        row = f"{label:<20}" + "".join(f"{times[n] * 1e3:>11.2f} ms"
                                       for n in backends)
        if len(times) == 2:
            row += f"{times['numpy'] / times['compiled']:>9.1f}x"
        print(row)
        if len(backends) == 2:
            ref = cases[label](backends["numpy"])
            alt = cases[label](backends["compiled"])
            assert np.array_equal(np.asarray(ref), np.asarray(alt)), \
                f"{label}: backends disagree"

    # end-to-end: 100 particle steps with densities
    def run_sim(backend):
        p = pos.copy()
        for _ in range(100):
            p = backend.em_step(p, noise, 1e-3, 128, TWO_PI, inv_wr)
            backend.box_counts(p, 128, TWO_PI)
        return p

    print()
    results = {}
    for name, backend in backends.items():
        dt = _time(lambda b=backend: run_sim(b), max(1, args.repeats // 2))
        results[name] = dt
        print(f"100-step particle loop [{name}]: {dt:.3f} s")
    if len(results) == 2:
        print(f"end-to-end speedup: "
              f"{results['numpy'] / results['compiled']:.1f}x")
        assert np.array_equal(run_sim(backends["numpy"]),
                              run_sim(backends["compiled"])), \
            "end-to-end trajectories disagree"
        print("bit-identical results across backends: yes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
