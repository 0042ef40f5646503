"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on shapes representative of the editing pipeline
(token grids from a 64x64 latent, d_model 320, rank-18 subspaces) and
prints per-kernel timings plus the numba speedup. Each pair of runs is
also cross-checked for numerical agreement, so a silent divergence
between backends fails loudly here before it would corrupt an edit.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--tokens N]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from dice import _kernels

KERNELS = ("cosine_matrix", "argmax_rows", "softmax_attention", "project_rows", "style_norms")


def make_inputs(n_tokens: int, dim: int, rank: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_tokens, dim))
    b = rng.standard_normal((n_tokens, dim))
    basis = np.linalg.qr(rng.standard_normal((dim, rank)))[0]
    sim = rng.standard_normal((n_tokens, n_tokens))
    return {
        "cosine_matrix": (a, b),
        "argmax_rows": (sim,),
        "softmax_attention": (a, b, rng.standard_normal((n_tokens, dim)), float(dim)),
        "project_rows": (a, basis),
        "style_norms": (a, basis),
    }


def time_kernel(fn, args, repeats: int) -> tuple[float, np.ndarray]:
    out = fn(*args)  # warm call; compiles the numba path
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, np.asarray(out)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7, help="timed runs per kernel, best is kept")
    parser.add_argument("--tokens", type=int, default=4096, help="token count per feature matrix")
    parser.add_argument("--dim", type=int, default=320, help="feature dimension")
    parser.add_argument("--rank", type=int, default=18, help="subspace rank")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    numpy_impl = _kernels.get_backend("numpy")
    try:
        numba_impl = _kernels.get_backend("numba")
    except ImportError:
        print("numba is not installed; only the numpy fallback can run", file=sys.stderr)
        return 1

    inputs = make_inputs(args.tokens, args.dim, args.rank, args.seed)
    print(f"tokens={args.tokens} dim={args.dim} rank={args.rank} repeats={args.repeats}")
    print(f"{'kernel':<20} {'numpy':>12} {'numba':>12} {'speedup':>9} {'max |diff|':>12}")

    worst_rel = 0.0
    for name in KERNELS:
        kernel_args = inputs[name]
        t_np, out_np = time_kernel(getattr(numpy_impl, name), kernel_args, args.repeats)
        t_nb, out_nb = time_kernel(getattr(numba_impl, name), kernel_args, args.repeats)
        diff = float(np.max(np.abs(out_np.astype(np.float64) - out_nb.astype(np.float64))))
        scale = max(float(np.max(np.abs(out_np))), 1e-30)
        worst_rel = max(worst_rel, diff / scale)
        print(
            f"{name:<20} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms"
            f" {t_np / t_nb:>8.2f}x {diff:>12.3e}"
        )

    # both backends run in float64; anything past accumulation-order noise is a bug
    if worst_rel > 1e-9:
        print(f"backend disagreement: relative error {worst_rel:.3e} exceeds 1e-9", file=sys.stderr)
        return 1
    print(f"backends agree (worst relative error {worst_rel:.3e})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
