import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from facegrowth.models import backend

try:
    COMPILED = backend.load("compiled")
except ImportError:   # extension not built
    COMPILED = None
PY = backend.load("python")

needs_compiled = pytest.mark.skipif(COMPILED is None, reason="compiled kernels not built")


def problem(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(3, 80)), int(rng.integers(1, 8))
    X = rng.normal(size=(n, d))
    if seed % 2:
        X = np.round(X, 1)   # force tied values
    y = rng.integers(0, 3, n).astype(np.int64)
    w = rng.integers(0, 3, n).astype(np.float64)
    w[0] = max(w[0], 1.0)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T).astype(np.int64)
    return rng, X, y, w, order


def same(a, b):
    return all(np.array_equal(u, v) for u, v in zip(a, b)) and len(a) == len(b)


@needs_compiled
@settings(max_examples=40)
@given(st.integers(0, 10 ** 6))
def test_class_tree_identical(seed):
    rng, X, y, w, order = problem(seed)
    for mf in (X.shape[1], 1):
        a = COMPILED.build_class_tree(X, y, w, 3, mf, np.uint64(seed), order)
        b = PY.build_class_tree(X, y, w, 3, mf, seed, order)
        assert same(a, b)
        assert np.array_equal(COMPILED.apply_tree(X, *a[:4]), PY.apply_tree(X, *b[:4]))


@needs_compiled
@settings(max_examples=40)
@given(st.integers(0, 10 ** 6))
def test_boost_tree_identical(seed):
    rng, X, y, w, order = problem(seed)
    g = rng.normal(size=len(y))
    h = rng.uniform(0.01, 0.25, len(y))
    args = (X, order, g, h, 4, 1.0, 1.0, 0.0, 1e-6)
    assert same(COMPILED.build_boost_tree(*args), PY.build_boost_tree(*args))


@needs_compiled
@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.integers(1, 7))
def test_knn_identical(seed, k):
    rng, X, *_ = problem(seed)
    q = np.round(rng.normal(size=(9, X.shape[1])), 1)
    k = min(k, len(X))
    assert np.array_equal(COMPILED.knn_neighbors(X, q, k), PY.knn_neighbors(X, q, k))


@needs_compiled
@settings(max_examples=25)
@given(st.integers(0, 10 ** 6))
def test_smo_identical(seed):
    rng, X, *_ = problem(seed)
    yy = np.where(rng.random(len(X)) < 0.5, -1.0, 1.0)
    K = np.exp(-0.5 * ((X[:, None] - X[None]) ** 2).sum(-1))
    Q = np.ascontiguousarray(yy[:, None] * yy[None] * K)
    a = COMPILED.smo_solve(Q, yy, 1.0, 1e-3, 100000)
    b = PY.smo_solve(Q, yy, 1.0, 1e-3, 100000)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) and a[2:] == b[2:]


def test_env_var_forces_fallback():
    code = "from facegrowth.models import backend; print(backend.BACKEND)"
    env = {**os.environ, "FACEGROWTH_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        backend.load("gpu")


@needs_compiled
def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    assert mod.main(["--rows", "40", "--width", "5", "--repeat", "1"]) == 0
    assert "SMO solve" in capsys.readouterr().out
