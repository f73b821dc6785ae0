"""Repeated stratified cross-validation over the scenario x model grid.

Seeds: the fold partition of repeat r is drawn from (master seed, r) and is
shared by every model of a target; each model fit gets its own seed derived
from (master seed, scenario, model, repeat, fold). Results therefore do not
depend on execution order or on the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import zlib
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .analysis import CLASS_NAMES
from .cephalometrics import TARGETS
from .features import PERIOD_VARIANTS, FeatureTable, Scenario
from .models import ModelError, ModelSpec, TrainConfig, fit
from .stats import one_sample_t_test

log = logging.getLogger(__name__)

RESULTS_HEADER = ("target", "period", "data_type", "model", "mean_acc", "std_acc", "baseline", "t", "p",
                  "significant")
ALPHA = 0.05
TOP_K = 5


@dataclass(frozen=True)
class CvPlan:
    folds: int = 5
    repeats: int = 20
    stratified: bool = True
    master_seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.repeats < 1:
            raise ValueError("need at least 1 repeat")


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode())


def derive_seed(master: int, *parts) -> int:
    """A 63-bit seed determined by the master seed and an ordered tuple of names/indices."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key(p) for p in parts))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 31) ^ int(lo)


def stratified_folds(labels: Sequence[int], folds: int, seed) -> np.ndarray:
    """Fold index per row; every class is spread over the folds as evenly as possible.

    Each class is shuffled and dealt round-robin. The dealing position carries
    over from one class to the next so fold sizes stay balanced as well.
    """
    y = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    out = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < folds:
            name = CLASS_NAMES[int(c)] if 0 <= int(c) < len(CLASS_NAMES) else str(c)
            raise ValueError(f"class {name} has {members.size} rows, fewer than {folds} folds")
        members = rng.permutation(members)
        out[members] = (offset + np.arange(members.size)) % folds
        offset = (offset + members.size) % folds
    return out


def mfc_baseline(labels: Sequence[int]) -> float:
    """Fraction of the most frequent class."""
    labels = list(np.asarray(labels).tolist())
    if not labels:
        raise ValueError("empty label set")
    return max(Counter(labels).values()) / len(labels)


@dataclass(frozen=True)
class EvalRecord:
    scenario: Scenario
    model: str
    accuracies: tuple[float, ...]
    mean: float
    std: float
    baseline: float
    t: float
    p: float
    significant: bool
    failures: tuple[str, ...] = ()

    @property
    def failed(self) -> bool:
        return bool(self.failures)

    def row(self) -> tuple:
        s = self.scenario
        return (s.target, s.period, s.data_type, self.model, repr(self.mean), repr(self.std),
                repr(self.baseline), repr(self.t), repr(self.p), str(self.significant).lower())


def summarize(scenario: Scenario, model: str, accuracies: Sequence[float], baseline: float,
              failures: Sequence[str] = (), two_sided: bool = False) -> EvalRecord:
    accs = tuple(float(a) for a in accuracies)
    ok = [a for a in accs if not math.isnan(a)]
    if len(ok) >= 2:
        res = one_sample_t_test(ok, baseline, two_sided=two_sided)
        mean, std, t, p = res.mean, res.std, res.t, res.p
    else:
        mean, std = (ok[0], 0.0) if ok else (math.nan, math.nan)
        t, p = math.nan, math.nan
    significant = (not failures) and p < ALPHA and mean > baseline
    return EvalRecord(scenario, model, accs, mean, std, baseline, t, p, bool(significant), tuple(failures))


class ZeroRule:
    """Stand-in model predicting the training majority class (lowest code on ties)."""

    name = "ZeroRule"

    def fit(self, X, y):
        counts = np.bincount(np.asarray(y), minlength=3)
        self.cls = int(np.argmax(counts))
        return self

    def predict(self, X):
        return np.full(len(X), self.cls, dtype=np.int64)


def run_cv(table: FeatureTable, spec: ModelSpec | str | ZeroRule, plan: CvPlan,
           train_config: TrainConfig | None = None, two_sided: bool = False) -> EvalRecord:
    """Repeated stratified k-fold accuracy of one model on one scenario table."""
    base_cfg = train_config or TrainConfig()
    is_zero = isinstance(spec, ZeroRule)
    if not is_zero and isinstance(spec, str):
        spec = ModelSpec.parse(spec)
    name = spec.name
    X, y = table.X, table.y
    if len(y) == 0:
        raise ValueError(f"empty feature table for {table.scenario}")
    baseline = mfc_baseline(y)
    accs, failures = [], []
    for r in range(plan.repeats):
        fold_seed = derive_seed(plan.master_seed, "folds", r)
        if plan.stratified:
            assign = stratified_folds(y, plan.folds, fold_seed)
        else:
            assign = np.random.default_rng(fold_seed).permutation(len(y)) % plan.folds
        for k in range(plan.folds):
            test = assign == k
            train = ~test
            try:
                if is_zero:
                    pred = ZeroRule().fit(X[train], y[train]).predict(X[test])
                else:
                    seed = derive_seed(plan.master_seed, table.scenario.key, name, r, k)
                    cfg = TrainConfig(**{**base_cfg.to_dict(), "seed": seed})
                    pred = fit(spec, X[train], y[train], cfg).predict(X[test])
                accs.append(float(np.mean(pred == y[test])))
            except (ModelError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                failures.append(f"repeat {r} fold {k}: {exc}")
                log.warning("%s %s repeat %d fold %d failed: %s", table.scenario, name, r, k, exc)
                accs.append(math.nan)
    return summarize(table.scenario, name, accs, baseline, failures, two_sided)


# grid execution -------------------------------------------------------------

_STATE: dict = {}


def _init_worker(tables, plan, cfg, two_sided):
    _STATE.update(tables=tables, plan=plan, cfg=cfg, two_sided=two_sided)


def _run_cell(task):
    skey, model = task
    with threadpool_limits(limits=1):
        return run_cv(_STATE["tables"][skey], model, _STATE["plan"], _STATE["cfg"], _STATE["two_sided"])


def run_grid(tables: Mapping[str, FeatureTable], models: Sequence[str], plan: CvPlan,
             train_config: TrainConfig | None = None, threads: int | None = None,
             two_sided: bool = False, progress=None) -> list[EvalRecord]:
    """Evaluate every (table, model) cell. Output order: tables in the given order, then models."""
    tasks = [(k, m) for k in tables for m in models]
    threads = threads or os.cpu_count() or 1
    cfg = train_config or TrainConfig()
    out = []
    if threads <= 1 or len(tasks) <= 1:
        _init_worker(dict(tables), plan, cfg, two_sided)
        try:
            for i, t in enumerate(tasks):
                out.append(_run_cell(t))
                if progress:
                    progress(i + 1, len(tasks), out[-1])
        finally:
            _STATE.clear()
        return out
    with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                             initargs=(dict(tables), plan, cfg, two_sided)) as ex:
        for i, rec in enumerate(ex.map(_run_cell, tasks, chunksize=1)):
            out.append(rec)
            if progress:
                progress(i + 1, len(tasks), rec)
    return out


# aggregation ----------------------------------------------------------------

def rank_key(rec: EvalRecord):
    mean = rec.mean if not math.isnan(rec.mean) else -math.inf
    std = rec.std if not math.isnan(rec.std) else math.inf
    return (-mean, std, rec.model, rec.scenario.data_type)


@dataclass
class ResultsTable:
    records: list[EvalRecord]
    blocks: dict[tuple[str, str], list[EvalRecord]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in self.records:
            w.writerow(r.row())
        return buf.getvalue()

    def render(self) -> str:
        return render_table(self)


def aggregate(records: Iterable[EvalRecord], top_k: int = TOP_K) -> ResultsTable:
    """Top ``top_k`` records per (target, period variant) across data types and models."""
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple[str, str], list[EvalRecord]] = {}
    for r in records:
        groups.setdefault((r.scenario.target, r.scenario.period), []).append(r)
    order = {(t, p): (TARGETS.index(t), PERIOD_VARIANTS.index(p)) for t, p in groups}
    blocks = {key: sorted(groups[key], key=rank_key)[:top_k] for key in sorted(groups, key=order.get)}
    return ResultsTable(records, blocks)


def _cell(rec: EvalRecord | None) -> tuple[str, str]:
    if rec is None:
        return "", ""
    mark = " *" if rec.significant else ""
    if math.isnan(rec.mean):
        return f"{rec.scenario.data_type}, {rec.model}", "failed"
    return (f"{rec.scenario.data_type}, {rec.model}",
            f"{100 * rec.mean:.2f} +- {100 * rec.std:.2f}{mark}")


def render_table(table: ResultsTable) -> str:
    """Plain-text report: per target, the best models for each input period."""
    width = 24
    lines = ["Best classification results per predicted variable and input period",
             "accuracy in %, mean +- sd over all folds; * = significantly above the majority-class baseline "
             f"(one-sample t-test, p < {ALPHA})", ""]
    header = "No. " + "".join(p.ljust(width) for p in PERIOD_VARIANTS)
    targets = [t for t in TARGETS if any(k[0] == t for k in table.blocks)]
    for tgt in targets:
        baselines = {r.baseline for r in table.records if r.scenario.target == tgt}
        base = "/".join(f"{100 * b:.2f}" for b in sorted(baselines))
        lines.append(f"Prediction of {tgt}(18-9)   [MFC baseline {base}%]")
        lines.append(header.rstrip())
        depth = max(len(table.blocks.get((tgt, p), [])) for p in PERIOD_VARIANTS)
        for i in range(depth):
            cells = []
            for p in PERIOD_VARIANTS:
                blk = table.blocks.get((tgt, p), [])
                cells.append(_cell(blk[i] if i < len(blk) else None))
            lines.append((f"{i + 1:<4}" + "".join(c[0].ljust(width) for c in cells)).rstrip())
            lines.append(("    " + "".join(c[1].ljust(width) for c in cells)).rstrip())
        lines.append("")
    return "\n".join(lines)


def read_results_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != RESULTS_HEADER:
        raise ValueError("unexpected results header")
    return rows


def records_from_rows(rows: Sequence[Mapping[str, str]]) -> list[EvalRecord]:
    """Rebuild summary records (without per-fold accuracies) from results CSV rows."""
    out = []
    for r in rows:
        sc = Scenario(r["data_type"], r["period"], r["target"])
        out.append(EvalRecord(sc, r["model"], (), float(r["mean_acc"]), float(r["std_acc"]),
                              float(r["baseline"]), float(r["t"]), float(r["p"]), r["significant"] == "true"))
    return out


__all__ = ["CvPlan", "EvalRecord", "ResultsTable", "ZeroRule", "aggregate", "derive_seed", "mfc_baseline",
           "render_table", "run_cv", "run_grid", "stratified_folds", "summarize"]
