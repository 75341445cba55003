"""Compare the compiled simplex kernels against the numpy fallback.

Runs per-kernel microbenchmarks and an end-to-end batch of bound-vector
solves on the small preset with each backend, asserting that both produce
identical results before timing them.

Usage: python benchmarks/bench_kernels.py [--preset small] [--solves 40]
"""

import argparse
import time

import numpy as np

from sdoplan import kernels
from sdoplan.epsilon import (EpsConfig, build_grid, payoff_table, run_wave,
                             tighten_ranges, wave_order)
from sdoplan.model import build_molp
from sdoplan.phantom import generate_phantom
from sdoplan.presets import preset_spec


def time_it(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def micro(backends):
    rng = np.random.default_rng(0)
    for m in (200, 700):
        d = rng.normal(size=2 * m)
        status = rng.choice([0, 1, 2, 3], size=2 * m).astype(np.int8)
        inv_scale = rng.uniform(0.1, 1.0, 2 * m)
        x = rng.normal(size=m)
        lo, up = x - 1.0, x + 1.0
        w = rng.normal(size=m)
        binv = np.asfortranarray(rng.normal(size=(m, m)))
        row = m // 2
        w[row] = 1.0
        print(f"- problem size m={m}")
        for name, mod in backends.items():
            t_enter = time_it(
                lambda: mod.choose_entering(d, status, inv_scale, 1e-7),
                200)
            t_ratio = time_it(
                lambda: mod.ratio_test(x, lo, up, w, 1.0, np.inf, 1e-9),
                200)
            scratch = binv.copy(order="F")
            t_update = time_it(
                lambda: mod.update_inverse(scratch, w, row), 100)
            print(f"  {name:>9}: choose_entering {t_enter * 1e6:7.1f} us | "
                  f"ratio_test {t_ratio * 1e6:7.1f} us | "
                  f"update_inverse {t_update * 1e6:8.1f} us")


def end_to_end(backends, preset, max_solves):
    instance = generate_phantom(preset_spec(preset, seed=1))
    model = build_molp(instance, cov_min=0.98)
    table, raw = payoff_table(model)
    ranges = tighten_ranges(raw, instance, 0.98).snapped()
    grid = wave_order(build_grid(ranges, 10, bounded=(1, 2, 3, 4)))
    print(f"- {preset} preset: wave over the {max_solves} loosest grid "
          f"vectors, filters on")
    results = {}
    for name, mod in backends.items():
        kernels.set_backend(name)
        t0 = time.perf_counter()
        archive, stats = run_wave(model, grid[:max_solves],
                                  EpsConfig(ranges=ranges))
        dt = time.perf_counter() - t0
        results[name] = {tuple(np.round(e.objectives, 9))
                         for e in archive.entries}
        print(f"  {name:>9}: {dt:6.2f}s wall | {stats.n_solved_models} LP "
              f"solves | {len(archive)} plans")
    sets = list(results.values())
    assert all(s == sets[0] for s in sets), "backends disagree"
    print("  backends produced identical plan sets")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--preset", default="small")
    parser.add_argument("--solves", type=int, default=60)
    args = parser.parse_args()
    backends = dict(kernels.available_backends())
    print(f"backends available: {', '.join(backends)} "
          f"(default: {kernels.backend_name()})")
    micro(backends)
    end_to_end(backends, args.preset, args.solves)


if __name__ == "__main__":
    main()
