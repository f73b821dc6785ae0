"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--rows 511] [--width 41] [--repeat 3]

Both backends get identical inputs; the script also checks that their
outputs agree before reporting timings.
"""
import argparse
import sys
import timeit

import numpy as np

from facegrowth.models import backend


def problems(rows: int, width: int, seed: int):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rows, width))
    y = rng.integers(0, 3, rows).astype(np.int64)
    w = np.bincount(rng.integers(0, rows, rows), minlength=rows).astype(np.float64)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T).astype(np.int64)
    g = rng.normal(size=rows)
    h = rng.uniform(0.05, 0.25, rows)
    q = rng.normal(size=(rows // 4, width))
    yy = np.where(y == 0, -1.0, 1.0)
    sq = np.sum(X ** 2, axis=1)
    K = np.exp(-(sq[:, None] + sq[None, :] - 2 * X @ X.T) / width)
    Q = np.ascontiguousarray(yy[:, None] * yy[None, :] * K)
    mf = max(1, int(np.sqrt(width)))
    return {
        "class tree (RF member)": lambda k, s: k.build_class_tree(X, y, w, 3, mf, s, order),
        "regression tree (boosting)": lambda k, s: k.build_boost_tree(X, order, g, h, 6, 1.0, 1.0, 0.0, 1e-6),
        "5-NN query": lambda k, s: k.knn_neighbors(X, q, 5),
        "SMO solve": lambda k, s: k.smo_solve(Q, yy, 1.0, 1e-3, 100000),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=511, help="training rows (4/5 of a 639-patient cohort)")
    ap.add_argument("--width", type=int, default=41)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    try:
        compiled = backend.load("compiled")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    python = backend.load("python")
    print(f"rows={args.rows} width={args.width} best of {args.repeat}")
    print(f"{'kernel':<28}{'compiled ms':>14}{'python ms':>14}{'speedup':>10}")
    for name, call in problems(args.rows, args.width, args.seed).items():
        a, b = call(compiled, np.uint64(args.seed)), call(python, args.seed)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        if not all(np.array_equal(u, v) for u, v in zip(a, b)):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 2
        tc = min(timeit.repeat(lambda: call(compiled, np.uint64(args.seed)), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: call(python, args.seed), number=1, repeat=args.repeat))
        print(f"{name:<28}{1e3 * tc:>14.2f}{1e3 * tp:>14.2f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
