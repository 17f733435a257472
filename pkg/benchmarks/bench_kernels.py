"""Benchmark the hot kernels: compiled build vs vectorized numpy build.

Both builds of every kernel stay importable side by side, so this script
times them on identical inputs and checks they agree.  When numba is
missing or disabled (FRACSPEC_NUMBA=0) the ``*_nb`` names fall back to
the plain interpreted loops; sizes are scaled down in that case so the
run still finishes.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fracspec._accel import HAS_NUMBA, NUMBA_ACTIVE
from fracspec import _kernels as K


def spd_batch(rng, count, n):
    g = rng.standard_normal((count, n, n))
    mats = g @ g.transpose(0, 2, 1) + n * np.eye(n)[None]
    return np.ascontiguousarray(mats)


def sphere_points(rng, count, n):
    v = rng.standard_normal((count, n))
    return np.ascontiguousarray(v / np.linalg.norm(v, axis=1, keepdims=True))


def best_of(fn, args, repeat):
    out = fn(*args)  # warmup; also the value used for the agreement check
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timed repetitions per kernel")
    ap.add_argument("--scale", type=float, default=1.0, help="multiply all problem sizes")
    args = ap.parse_args()

    scale = args.scale
    if not NUMBA_ACTIVE:
        scale /= 64.0  # interpreted loops: keep the run under a minute
    rng = np.random.default_rng(7)

    nd = max(8, int(4096 * scale))
    ns = max(8, int(2048 * scale))
    nb = max(64, int(200_000 * scale))
    nt = max(8, int(960 * np.sqrt(scale)))

    mats3 = spd_batch(rng, nd, 3)
    wx = np.ascontiguousarray(rng.uniform(0.5, 1.0, nd))
    dirs3 = sphere_points(rng, ns, 3)
    dirs2 = sphere_points(rng, ns, 2)
    ws = np.ascontiguousarray(np.full(ns, 4.0 * np.pi / ns))

    matsb = spd_batch(rng, nb, 3)
    xips = np.ascontiguousarray(rng.standard_normal((nb, 2)))

    side = 64
    kern_flat = np.ascontiguousarray(rng.standard_normal(side * side))
    ii, jj = np.meshgrid(np.arange(nt // 30 + 2), np.arange(30), indexing="ij")
    idx = np.ascontiguousarray(np.stack([ii.ravel()[:nt], jj.ravel()[:nt]], axis=1).astype(np.int64))
    strides = np.array([side, 1], dtype=np.int64)
    shape = np.array([side, side], dtype=np.int64)

    cases = [
        ("quad_form_power_sum", K.quad_form_power_sum_nb, K.quad_form_power_sum_np,
         (mats3, wx, dirs3, ws, -1.5), f"{nd} mats x {ns} dirs"),
        ("kappa0_power_sum", K.kappa0_power_sum_nb, K.kappa0_power_sum_np,
         (mats3, wx, dirs2, ws, -2.0), f"{nd} mats x {ns} dirs"),
        ("dtn_weight_sum", K.dtn_weight_sum_nb, K.dtn_weight_sum_np,
         (mats3, wx, dirs2, ws, 1.0), f"{nd} mats x {ns} dirs"),
        ("boundary_quantities", K.boundary_quantities_nb, K.boundary_quantities_np,
         (matsb, xips), f"{nb} samples"),
        ("toeplitz_gather", K.toeplitz_gather_nb, K.toeplitz_gather_np,
         (kern_flat, idx, strides, shape), f"{nt} x {nt} gather"),
    ]

    label = "numba" if NUMBA_ACTIVE else ("numba-off(py-loop)" if HAS_NUMBA else "py-loop")
    print(f"compiled build: {label}; repeats: {args.repeat}; size scale: {scale:g}")
    print(f"{'kernel':<22} {'size':<22} {label:>12} {'numpy':>12} {'speedup':>9}  agree")
    for name, f_nb, f_np, inputs, size in cases:
        out_nb, t_nb = best_of(f_nb, inputs, args.repeat)
        out_np, t_np = best_of(f_np, inputs, args.repeat)
        a = np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)).ravel() for x in np.atleast_1d(out_nb)]) \
            if isinstance(out_nb, tuple) else np.atleast_1d(np.asarray(out_nb, dtype=float)).ravel()
        b = np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)).ravel() for x in np.atleast_1d(out_np)]) \
            if isinstance(out_np, tuple) else np.atleast_1d(np.asarray(out_np, dtype=float)).ravel()
        rel = float(np.max(np.abs(a - b) / np.maximum(1e-300, np.abs(b))))
        print(f"{name:<22} {size:<22} {t_nb * 1e3:>10.2f}ms {t_np * 1e3:>10.2f}ms {t_np / t_nb:>8.1f}x  {rel:.1e}")


if __name__ == "__main__":
    main()
