"""Timing harness for the rasterizer core: compiled kernel vs NumPy fallback.

Renders freshly sampled scenes through both backends, checks they agree
bit-for-bit, and reports per-frame time and the speedup. Run from anywhere:

    python3 benchmarks/bench_rasterize.py [--frames 200] [--resolutions 64 128]
"""
import argparse
import time

import numpy as np

from slotbench import _kernels
from slotbench.scenegen import sample_scene
from slotbench.scenegen.render import entity_ids


def time_backend(states, resolution, impl):
    # entity_ids routes through the active backend; monkeypatch to select
    orig = _kernels.entity_id_buffer
    _kernels.entity_id_buffer = impl
    try:
        t0 = time.perf_counter()
        out = [entity_ids(s, resolution) for s in states]
        dt = time.perf_counter() - t0
    finally:
        _kernels.entity_id_buffer = orig
    return dt, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[64, 128])
    ap.add_argument("--blocks", type=int, nargs="+", default=[3, 8])
    args = ap.parse_args()

    if _kernels.BACKEND != "cython":
        print("compiled kernel not available; timing the fallback against itself")
    compiled = _kernels.entity_id_buffer
    fallback = _kernels.entity_id_buffer_fallback

    print(f"backend: {_kernels.BACKEND}, frames per cell: {args.frames}")
    print(f"{'res':>5} {'blocks':>6} {'compiled ms':>12} {'numpy ms':>10} {'speedup':>8}")
    for res in args.resolutions:
        for n_blocks in args.blocks:
            states = [sample_scene([4242, i], n_blocks) for i in range(args.frames)]
            t_c, out_c = time_backend(states, (res, res), compiled)
            t_f, out_f = time_backend(states, (res, res), fallback)
            for a, b in zip(out_c, out_f):
                assert np.array_equal(a, b), "backends disagree"
            per_c = 1000 * t_c / args.frames
            per_f = 1000 * t_f / args.frames
            print(f"{res:>5} {n_blocks:>6} {per_c:>12.3f} {per_f:>10.3f} {t_f / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
