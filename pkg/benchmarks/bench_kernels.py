"""Throughput comparison: compiled kernels vs the numpy fallback.

Usage: python benchmarks/bench_kernels.py [n_particles] [n_steps]
"""

import sys
import time

import numpy as np

from tdbilliards import _pykernels, kernels
from tdbilliards.scenes import shipped_scene


def bench_step(scene, n, steps, impl, threads):
    cfg = scene.config
    rng = np.random.default_rng(0)
    perims = cfg.perimeters
    di = rng.integers(0, len(perims), n).astype(np.int64)
    r = rng.uniform(0, perims[di])
    phi = np.arcsin(rng.uniform(-1, 1, n))
    scx, scy, sR, smark = kernels.geometry_arrays(cfg)
    ccx, ccy, cR, cdisk = kernels.candidates(cfg, scene.horizon.t)
    t0 = time.perf_counter()
    for _ in range(steps):
        out = impl.step_batch(
            di, r, phi, scx, scy, sR, smark, sR, smark,
            ccx, ccy, cR, cdisk, scene.beta, scene.horizon.t, None, threads,
        )
        di, r, phi = out[0], out[1], out[2]
        lost = out[7] != 0
        if lost.any():
            keep = ~lost
            di, r, phi = di[keep], r[keep], phi[keep]
    dt = time.perf_counter() - t0
    return dt, n * steps / dt


def bench_horizon(scene, impl, n_base, n_dirs, threads):
    import math

    ccx, ccy, cR, _ = kernels.candidates(scene.config, scene.horizon.t)
    t0 = time.perf_counter()
    impl.horizon_margins(
        ccx, ccy, cR, scene.horizon.t, math.sin(scene.horizon.phi),
        n_base, n_dirs, threads,
    )
    return time.perf_counter() - t0


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 10
    scene = shipped_scene("finite_horizon_triple")
    threads = kernels.n_threads()
    impls = [("numpy", _pykernels)]
    if kernels.BACKEND == "cython":
        impls.insert(0, ("cython", kernels._impl))
    else:
        print("compiled backend not available; benchmarking fallback only")

    print(f"collision step: {n} particles x {steps} steps, {threads} thread(s)")
    rates = {}
    for name, impl in impls:
        bench_step(scene, min(n, 10_000), 1, impl, threads)  # warm up
        dt, rate = bench_step(scene, n, steps, impl, threads)
        rates[name] = rate
        print(f"  {name:>7}: {dt:7.2f} s   {rate / 1e6:8.2f} M collisions/s")
    if len(rates) == 2:
        print(f"  speedup: {rates['cython'] / rates['numpy']:.1f}x")

    print("horizon scan: 96x96 base points x 192 directions")
    for name, impl in impls:
        dt = bench_horizon(scene, impl, 96, 192, threads)
        print(f"  {name:>7}: {dt:7.2f} s")


if __name__ == "__main__":
    main()
