"""Acceptance criteria 1-10, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.

The full 720-cell grid takes hours of CPU, so by default criterion 1 checks
the recorded full run in ``artifacts/fullgrid`` and re-computes a sample of its
cells live. ``FACEGROWTH_FULL_GRID=1`` runs the whole grid inside the test.
"""
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from facegrowth import analysis, cli, synthgen
from facegrowth.cephalometrics import fa, pn_an, sn_mp
from facegrowth.config import resolve
from facegrowth.evaluation import CvPlan, run_cv, summarize
from facegrowth.features import enumerate_scenarios, feature_width
from facegrowth.geometry import (SimilarityTransform, align_cohort, optimal_rotation, sum_of_distances)
from facegrowth.models import CANONICAL_MODELS, ModelSpec, fit, mlp_gradient_check
from facegrowth.models.mlp import cross_entropy, forward, layer_shapes, n_parameters
from facegrowth.pipeline import prepare
from facegrowth.stats import one_sample_t_test, t_from_summary, t_sf

ROOT = Path(__file__).resolve().parents[1]
FULL_GRID_DIR = ROOT / "artifacts" / "fullgrid"
FULL_GRID_SEED = 7
REFERENCE_CORES = 4
FULL_GRID_BUDGET_S = 3600.0
SMOKE_BUDGET_S = 180.0


def similarity(rng):
    return SimilarityTransform(float(rng.uniform(0.1, 10.0)), float(rng.uniform(-math.pi, math.pi)),
                               tuple(rng.uniform(-1e3, 1e3, 2)))


# 1 -----------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_c1_grid_constants(note):
    assert len(enumerate_scenarios()) == 45
    assert len(CANONICAL_MODELS) == 16 and len({ModelSpec.parse(m) for m in CANONICAL_MODELS}) == 16
    note("45 scenarios x 16 models")


def _check_full_run(out: Path, note):
    from facegrowth.evaluation import read_results_csv
    rows = read_results_csv((out / "results.csv").read_text())
    assert len(rows) == 720
    assert len({(r["target"], r["period"], r["data_type"], r["model"]) for r in rows}) == 720
    acc = json.loads((out / "accuracies.json").read_text())
    assert acc["folds"] * acc["repeats"] == 100
    assert len(acc["accuracies"]) == 720
    assert all(len(v) == 100 for v in acc["accuracies"].values())
    meta = json.loads((out / "run_metadata.json").read_text())
    assert meta["status"] == "ok" and meta["n_records"] == 720 and meta["failed_cells"] == []
    note(f"720 records x 100 accuracies in {out.name}")
    return rows, meta


@pytest.mark.criterion(1)
@pytest.mark.skipif(os.environ.get("FACEGROWTH_FULL_GRID") == "1", reason="live full grid requested")
def test_c1_recorded_full_grid(note, full_prepared):
    assert FULL_GRID_DIR.is_dir(), f"no recorded full run in {FULL_GRID_DIR}"
    rows, meta = _check_full_run(FULL_GRID_DIR, note)
    cfg = resolve(seed=FULL_GRID_SEED)
    assert meta["config_digest"] == cfg.digest and meta["seed"] == FULL_GRID_SEED
    # the recorded run must be reproducible: recompute a sample of cells bit for bit
    assert full_prepared.cohort.patient_ids == synthgen.generate(cfg.synth).patient_ids
    prep = prepare(synthgen.generate(cfg.synth))
    by_key = {(r["data_type"] + "/" + r["period"] + "/" + r["target"], r["model"]): r for r in rows}
    for key, model in [("ceph/12-9/SN-MP", "LR"), ("proc/9/FA", "NN(3)"), ("trans/9,12-9/PN-AN", "DT")]:
        rec = run_cv(prep.table(key), model, cfg.plan, cfg.training)
        assert list(rec.row()) == [by_key[(key, model)][h] for h in by_key[(key, model)]], (key, model)
    timing = json.loads((FULL_GRID_DIR / "timing.json").read_text())
    normalized = timing["cpu_seconds"] / REFERENCE_CORES
    note(f"full grid {timing['cpu_seconds']:.0f} CPU s on one core -> {normalized / 60:.1f} min on "
         f"{REFERENCE_CORES} cores (budget 60)")
    assert normalized <= FULL_GRID_BUDGET_S


@pytest.mark.criterion(1)
@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("FACEGROWTH_FULL_GRID") != "1", reason="set FACEGROWTH_FULL_GRID=1")
def test_c1_live_full_grid(tmp_path, note):
    start = time.perf_counter()
    code = cli.main(["--seed", str(FULL_GRID_SEED), "--out", str(tmp_path), "run"])
    wall = time.perf_counter() - start
    assert code == 0
    _, meta = _check_full_run(tmp_path, note)
    cores = meta["threads"]
    # with fewer worker cores than the reference machine, scale CPU time to the reference
    normalized = wall if cores >= REFERENCE_CORES else meta["grid_cpu_seconds"] / REFERENCE_CORES
    note(f"wall {wall:.0f} s, normalized {normalized / 60:.1f} min")
    assert normalized <= FULL_GRID_BUDGET_S


@pytest.mark.criterion(1)
def test_c1_smoke_runtime(tmp_path, note):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "facegrowth.cli", "--smoke", "--out", str(tmp_path), "run"],
                          capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    note(f"smoke {elapsed:.1f} s")
    assert elapsed <= SMOKE_BUDGET_S


@pytest.mark.criterion(1)
def test_c1_records_have_100_accuracies(full_prepared, note):
    rec = run_cv(full_prepared.table("ceph/9/FA"), "LR", CvPlan(5, 20, True, 0))
    assert len(rec.accuracies) == 100 and not rec.failed
    note("5 folds x 20 repeats = 100")


# 2 -----------------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_c2_feature_widths(full_prepared, note):
    widths = {}
    for key, tab in full_prepared.tables().items():
        assert tab.width == feature_width(tab.scenario), key
        widths[key] = tab.width
    assert len(widths) == 45
    assert min(widths.values()) == 16 and max(widths.values()) == 82
    note("min 16, max 82")


# 3 -----------------------------------------------------------------------------

@pytest.mark.criterion(3)
def test_c3_alignment_postconditions(full_cohort, note):
    aligned, _ = align_cohort(full_cohort)
    worst_c = max(float(np.linalg.norm(a.mean(axis=0))) for a in aligned.values())
    worst_s = max(abs(sum_of_distances(a) - 1.0) for a in aligned.values())
    note(f"max centroid norm {worst_c:.1e}, max size error {worst_s:.1e}")
    assert worst_c < 1e-9 and worst_s <= 1e-9


@pytest.mark.criterion(3)
def test_c3_rotation_grid_oracle(note):
    rng = np.random.default_rng(3)
    grid = np.arange(-math.pi, math.pi, 1e-4)
    c, s = np.cos(grid), np.sin(grid)
    worst = 0.0
    for _ in range(100):
        a = rng.normal(size=(20, 2))
        b = rng.normal(size=(20, 2))
        a -= a.mean(axis=0)
        b -= b.mean(axis=0)
        # squared distance of the rotated a to b, evaluated on the whole grid
        ra =a[:, 0][None, :] * c[:, None] - a[:, 1][None, :] * s[:, None]
        rb = a[:, 0][None, :] * s[:, None] + a[:, 1][None, :] * c[:, None]
        cost = np.sum((ra - b[:, 0]) ** 2 + (rb - b[:, 1]) ** 2, axis=1)
        best = grid[int(np.argmin(cost))]
        got = optimal_rotation(a, b).angle
        worst = max(worst, abs((got - best + math.pi) % (2 * math.pi) - math.pi))
    note(f"max deviation {worst:.1e} rad")
    assert worst <= 1e-4


# 4 -----------------------------------------------------------------------------

@pytest.mark.criterion(4)
def test_c4_measurement_invariance(full_cohort, note):
    rng = np.random.default_rng(4)
    cephs = list(full_cohort.cephalograms())
    worst_angle, worst_lin = 0.0, 0.0
    for i in range(1000):
        ceph = cephs[int(rng.integers(len(cephs)))]
        tr = similarity(rng)
        moved = ceph.with_coords(tr.apply(ceph.coords))
        worst_angle = max(worst_angle, abs(sn_mp(moved) - sn_mp(ceph)), abs(fa(moved) - fa(ceph)))
        scaled = ceph.with_coords(ceph.coords * tr.scale)
        base = pn_an(ceph) * tr.scale
        worst_lin = max(worst_lin, abs(pn_an(scaled) - base) / abs(base))
    note(f"max angle change {worst_angle:.1e} deg, PN-AN relative error {worst_lin:.1e}")
    assert worst_angle <= 1e-9
    assert worst_lin < 1e-12


# 5 -----------------------------------------------------------------------------

def _deltas(values):
    return [analysis.GrowthDelta(f"P{i:04d}", "SN-MP", (9, 18), float(v)) for i, v in enumerate(values)]


@pytest.mark.criterion(5)
def test_c5_gaussian_mixed_fraction(note):
    rng = np.random.default_rng(5)
    labels, stats = analysis.label(_deltas(rng.normal(0.4, 3.0, 639)))
    frac = stats.counts[analysis.MIXED] / 639
    note(f"Mixed fraction {frac:.4f}")
    assert 0.63 <= frac <= 0.73


@pytest.mark.criterion(5)
def test_c5_boundary_ordering_every_run(full_prepared, note):
    rng = np.random.default_rng(55)
    runs = 0
    for target in ("SN-MP", "FA", "PN-AN"):
        d = analysis.growth_deltas(full_prepared.measurements, target).deltas
        labels, stats = analysis.label(d)
        analysis.check_label_boundaries(d, labels, stats)
        runs += 1
    for _ in range(200):
        d = _deltas(rng.standard_t(3, int(rng.integers(2, 700))))
        labels, stats = analysis.label(d)       # label() asserts the invariant itself
        analysis.check_label_boundaries(d, labels, stats)
        runs += 1
    note(f"{runs} runs")


@pytest.mark.criterion(5)
def test_c5_balanced_counts(note):
    rng = np.random.default_rng(555)
    for n in list(range(3, 40)) + [639]:
        d = _deltas(rng.normal(size=n))
        labels, _ = analysis.label(d)
        counts = analysis.class_counts(analysis.balanced_relabel(d, labels))
        assert all(abs(c - n / 3) <= 1 for c in counts), (n, counts)
    note("n = 3..39 and 639")


@pytest.mark.criterion(5)
def test_c5_balanced_noise_labels_near_third(note):
    cohort = synthgen.generate(synthgen.SynthConfig(n_patients=639, seed=21, class_signal=0.0))
    prep = prepare(cohort, balanced=True)
    rng = np.random.default_rng(5555)
    best = 0.0
    for target in ("SN-MP", "FA", "PN-AN"):
        tab = prep.table(f"ceph/9/{target}")
        # noise labels: the balanced classes shuffled across patients
        from facegrowth.features import FeatureTable
        noisy = FeatureTable(tab.scenario, tab.patient_ids, tab.feature_names, np.array(tab.X),
                             rng.permutation(tab.y))
        for model in ("LR", "NN(5)", "DT"):
            rec = run_cv(noisy, model, CvPlan(5, 20, True, 21))
            assert rec.baseline == pytest.approx(1 / 3, abs=1e-3)
            best = max(best, rec.mean)
    note(f"best mean accuracy {best:.4f} vs baseline 0.3333")
    assert abs(best - 1 / 3) <= 0.05


# 6 -----------------------------------------------------------------------------

@pytest.mark.criterion(6)
def test_c6_iid_increment_correlation(note):
    rng = np.random.default_rng(6)
    meas = {}
    for i, inc in enumerate(rng.normal(0, 1.0, (639, 3))):
        v = 30.0
        meas[(f"P{i:04d}", 9)] = {"SN-MP": v}
        for st, d in zip((12, 15, 18), inc):
            v += d
            meas[(f"P{i:04d}", st)] = {"SN-MP": v}
    cm = analysis.period_correlations(meas, "SN-MP")
    periods = list(cm.periods)
    r = cm.values[periods.index((9, 12)), periods.index((9, 18))]
    note(f"corr(9-12, 9-18) = {r:.4f} vs {1 / math.sqrt(3):.4f}")
    assert abs(r - 1 / math.sqrt(3)) <= 0.05


@pytest.mark.criterion(6)
def test_c6_telescoping_and_matrix_shape(full_prepared, note):
    meas = full_prepared.measurements
    for target in ("SN-MP", "FA", "PN-AN"):
        whole = {d.patient_id: d.value for d in analysis.growth_deltas(meas, target, (9, 18)).deltas}
        parts = [{d.patient_id: d.value for d in analysis.growth_deltas(meas, target, p).deltas}
                 for p in ((9, 12), (12, 15), (15, 18))]
        for pid in parts[1]:
            assert whole[pid] == parts[0][pid] + parts[1][pid] + parts[2][pid]
        cm = analysis.period_correlations(meas, target)
        assert np.max(np.abs(cm.values - cm.values.T)) <= 1e-12
        assert np.max(np.abs(np.diag(cm.values) - 1.0)) <= 1e-12
    note("exact telescoping, symmetric unit-diagonal matrices")


# 7 -----------------------------------------------------------------------------

@pytest.mark.criterion(7)
def test_c7_gradient_check(note):
    rng = np.random.default_rng(7)
    worst = 0.0
    for spec, rows in (("MLP", 4), ("MLP(20)", 8), ("MLP(50,10)", 8)):
        X = rng.normal(size=(rows, 6))
        y = np.arange(rows) % 3
        worst = max(worst, mlp_gradient_check(spec, X, y, seed=int(rng.integers(1000))))
    note(f"max relative error {worst:.1e}")
    assert worst < 1e-4


@pytest.mark.criterion(7)
def test_c7_uniform_loss(note):
    X = np.random.default_rng(77).normal(size=(12, 5))
    for hidden in ((), (20,), (50, 10)):
        P, _ = forward(np.zeros(n_parameters(5, hidden)), layer_shapes(5, hidden), X)
        loss = cross_entropy(P, np.eye(3)[np.arange(12) % 3])
        assert abs(loss - math.log(3)) <= 1e-9
    note("loss = ln 3")


@pytest.mark.criterion(7)
def test_c7_knn_oracle(note):
    rng = np.random.default_rng(777)
    X = rng.normal(size=(300, 6))
    y = rng.integers(0, 3, 300)
    model = fit("NN(5)", X, y)
    Xs = (X - X.mean(axis=0)) / X.std(axis=0)
    queries = rng.normal(size=(200, 6))
    Qs = (queries - X.mean(axis=0)) / X.std(axis=0)
    totals = np.bincount(y, minlength=3)
    expected = []
    for q in Qs:
        d = np.sum((Xs - q) ** 2, axis=1)
        nb = sorted(range(300), key=lambda i: (d[i], i))[:5]
        votes = np.bincount(y[nb], minlength=3)
        expected.append(min((c for c in range(3) if votes[c] == votes.max()), key=lambda c: (-totals[c], c)))
    assert model.predict(queries).tolist() == expected
    note("200/200 queries")


@pytest.mark.criterion(7)
def test_c7_rf_vote(full_prepared, note):
    tab = full_prepared.table("ceph/12-9/FA")
    model = fit("RF(100)", tab.X, tab.y)
    votes = model.estimator.tree_predictions(tab.X)
    counts = np.stack([np.bincount(v, minlength=3) for v in votes.T])
    assert np.array_equal(model.predict(tab.X), np.argmax(counts, axis=1))
    note("ensemble = recomputed majority")


# 8 -----------------------------------------------------------------------------

@pytest.mark.criterion(8)
def test_c8_quantile_table(note):
    p = t_sf(1.6604, 99)
    note(f"p = {p:.6f}")
    assert abs(p - 0.05) <= 1e-4


@pytest.mark.criterion(8)
def test_c8_table_cell(note):
    t = t_from_summary(0.7125, 0.0231, 100, 0.6823)
    # 100 samples with exactly that mean and sample std
    z = np.random.default_rng(8).normal(size=100)
    z = (z - z.mean()) / z.std(ddof=1)
    samples = 0.7125 + 0.0231 * z
    rec = summarize(enumerate_scenarios()[0], "LR", samples, 0.6823)
    res = one_sample_t_test(samples, 0.6823)
    note(f"t = {t:.3f}, p = {res.p:.1e}")
    assert t == pytest.approx(13.07, abs=0.005)
    assert res.t == pytest.approx(t, rel=1e-9)
    assert res.p < 1e-20 and rec.significant


# 9 -----------------------------------------------------------------------------

@pytest.mark.criterion(9)
def test_c9_signal_is_learned(note):
    cohort = synthgen.generate(synthgen.SynthConfig(n_patients=639, seed=0, class_signal=1.0))
    tab = prepare(cohort).table("ceph/12-9/SN-MP")
    recs = [run_cv(tab, m, CvPlan(5, 20, True, 0)) for m in ("LR", "SVM", "RF(100)", "XGB(100)")]
    best = max(recs, key=lambda r: r.mean)
    note(f"best {best.model} {best.mean:.4f}, p = {best.p:.1e}")
    assert best.mean >= 0.90 and best.significant


@pytest.mark.criterion(9)
def test_c9_single_timestamp_null(note):
    single = [s for s in enumerate_scenarios() if s.period in ("9", "12")]
    assert len(single) == 18
    total = not_sig = 0
    per_seed_clean = 0
    for seed in range(50):
        cohort = synthgen.generate(synthgen.SynthConfig(n_patients=639, seed=seed, class_signal=0.0))
        prep = prepare(cohort)
        flags = [run_cv(prep.table(sc), "NN(5)", CvPlan(5, 20, True, seed)).significant for sc in single]
        total += len(flags)
        not_sig += flags.count(False)
        per_seed_clean += not any(flags)
    frac = not_sig / total
    note(f"{not_sig}/{total} records not significant; {per_seed_clean}/50 seeds without any")
    assert frac >= 0.9


@pytest.mark.criterion(9)
def test_c9_permuted_labels(full_prepared, note):
    tab = full_prepared.table("ceph/12-9/SN-MP")
    from facegrowth.features import FeatureTable
    clean = 0
    for seed in range(50):
        y = np.random.default_rng(seed).permutation(tab.y)
        perm = FeatureTable(tab.scenario, tab.patient_ids, tab.feature_names, np.array(tab.X), y)
        clean += not run_cv(perm, "NN(5)", CvPlan(5, 20, True, seed)).significant
    note(f"{clean}/50 seeds not significant")
    assert clean >= 45


# 10 ----------------------------------------------------------------------------

@pytest.mark.criterion(10)
def test_c10_thread_count_determinism(tmp_path, note):
    digests = set()
    for threads in (1, 4, 8):
        out = tmp_path / f"t{threads}"
        assert cli.main(["--smoke", "--seed", "10", "--threads", str(threads), "--out", str(out), "run"]) == 0
        digests.add((out / "results.csv").read_bytes())
        meta = json.loads((out / "run_metadata.json").read_text())
        assert meta["threads"] == threads
    note(f"{len(digests)} distinct results file(s) over threads 1, 4, 8")
    assert len(digests) == 1
