"""Growth deltas, +-1 sd growth-direction labels, period correlations and group trajectories."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .data_model import STAGES, Cohort, ValidationError
from .geometry import transform_to_sn_frame

HORIZONTAL, MIXED, VERTICAL = 0, 1, 2
CLASS_NAMES = ("Horizontal", "Mixed", "Vertical")
CLASS_CODES = {n: i for i, n in enumerate(CLASS_NAMES)}

LABEL_PERIOD = (9, 18)
CORRELATION_PERIODS = ((9, 12), (12, 15), (15, 18), (9, 15), (12, 18), (9, 18))

LEAKAGE_NOTE = ("label thresholds (mean +- sd of the growth delta) are computed on the full cohort, "
                "so they see the test rows of every cross-validation fold")


@dataclass(frozen=True)
class GrowthDelta:
    patient_id: str
    target: str
    period: tuple[int, int]
    value: float


@dataclass
class DeltaResult:
    deltas: list[GrowthDelta]
    excluded: list[str] = field(default_factory=list)

    def values(self) -> np.ndarray:
        return np.array([d.value for d in self.deltas])


def growth_deltas(measurements: Mapping[tuple[str, int], Mapping[str, float]], target: str,
                  period: tuple[int, int] = LABEL_PERIOD) -> DeltaResult:
    """Change of ``target`` between two stages for every patient that has both.

    A multi-step period is the left-to-right sum of consecutive-stage changes
    over the stages the patient has, so period deltas telescope exactly.
    """
    start, end = period
    if start not in STAGES or end not in STAGES or start >= end:
        raise ValueError(f"bad period {period}")
    by_patient: dict[str, dict[int, float]] = {}
    for (pid, stage), vals in measurements.items():
        by_patient.setdefault(pid, {})[stage] = vals[target]
    out, excluded = [], []
    for pid in sorted(by_patient):
        st = by_patient[pid]
        if start not in st or end not in st:
            excluded.append(pid)
            continue
        chain = [s for s in STAGES if start <= s <= end and s in st]
        value = 0.0
        for a, b in zip(chain, chain[1:]):
            value += st[b] - st[a]
        out.append(GrowthDelta(pid, target, period, value))
    return DeltaResult(out, excluded)


@dataclass(frozen=True)
class LabelingStats:
    target: str
    mean: float
    std: float
    lower: float
    upper: float
    counts: tuple[int, int, int]
    degenerate: bool = False
    std_convention: str = "sample (n-1)"
    note: str = LEAKAGE_NOTE


def label(deltas: Sequence[GrowthDelta]) -> tuple[dict[str, int], LabelingStats]:
    """Three growth classes from mean +- one sample standard deviation.

    Values exactly on a threshold stay Mixed. With zero spread everything is Mixed.
    """
    if len(deltas) < 2:
        raise ValidationError("labeling needs at least two deltas")
    values = [d.value for d in deltas]
    mean = statistics.fmean(values)
    std = statistics.stdev(values)
    lower, upper = mean - std, mean + std
    labels = {}
    for d in deltas:
        if std > 0 and d.value < lower:
            labels[d.patient_id] = HORIZONTAL
        elif std > 0 and d.value > upper:
            labels[d.patient_id] = VERTICAL
        else:
            labels[d.patient_id] = MIXED
    counts = tuple(int(sum(1 for c in labels.values() if c == k)) for k in range(3))
    stats = LabelingStats(deltas[0].target, mean, std, lower, upper, counts, degenerate=std == 0)
    check_label_boundaries(deltas, labels, stats)
    return labels, stats


def check_label_boundaries(deltas, labels, stats: LabelingStats):
    if stats.degenerate:
        return
    by_class = {k: [d.value for d in deltas if labels[d.patient_id] == k] for k in range(3)}
    ok = (all(v < stats.lower for v in by_class[HORIZONTAL])
          and all(stats.lower <= v <= stats.upper for v in by_class[MIXED])
          and all(v > stats.upper for v in by_class[VERTICAL]))
    if not ok:
        raise AssertionError(f"label boundary invariant violated for {stats.target}")


def balanced_targets(n: int) -> tuple[int, int, int]:
    """Class sizes of a balanced relabeling: floor(n/3) each, the first extra case
    goes to Mixed and a second one to Horizontal."""
    base, rest = divmod(n, 3)
    h = base + (rest == 2)
    m = base + (rest >= 1)
    return h, m, n - h - m


def balanced_relabel(deltas: Sequence[GrowthDelta], labels: Mapping[str, int]) -> dict[str, int]:
    """Re-split the cases by delta rank into (near) equal thirds.

    On +-1 sd labels this moves the lowest Mixed cases to Horizontal and the
    highest to Vertical; an extreme class above its share gives its innermost
    cases back to Mixed. The value ordering of the classes is kept.
    """
    n = len(deltas)
    if n < 3:
        raise ValidationError("balanced relabeling needs at least three cases")
    missing = [d.patient_id for d in deltas if d.patient_id not in labels]
    if missing:
        raise ValidationError(f"no label for {missing[:3]}")
    h, m, _ = balanced_targets(n)
    ranked = sorted(deltas, key=lambda d: (d.value, labels[d.patient_id], d.patient_id))
    out = dict(labels)
    for i, d in enumerate(ranked):
        out[d.patient_id] = HORIZONTAL if i < h else MIXED if i < h + m else VERTICAL
    return out


def class_counts(labels: Mapping[str, int]) -> tuple[int, int, int]:
    vals = list(labels.values())
    return tuple(vals.count(k) for k in range(3))


@dataclass(frozen=True)
class CorrelationMatrix:
    target: str
    periods: tuple[tuple[int, int], ...]
    values: np.ndarray      # NaN where a period has zero variance
    n_patients: int
    zero_variance: tuple[tuple[int, int], ...]


def pearson_matrix(columns: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Pearson correlations between the columns of an (n, p) array (sample convention)."""
    x = np.asarray(columns, float)
    n, p = x.shape
    centred = x - x.mean(axis=0)
    ss = np.einsum("ij,ij->j", centred, centred)
    zero = [j for j in range(p) if not ss[j] > 0]
    r = np.full((p, p), np.nan)
    for i in range(p):
        for j in range(i, p):
            if i in zero or j in zero:
                continue
            if i == j:
                r[i, i] = 1.0
                continue
            v = float(np.dot(centred[:, i], centred[:, j]) / math.sqrt(ss[i] * ss[j]))
            v = min(1.0, max(-1.0, v))
            r[i, j] = r[j, i] = v
    return r, zero


def period_correlations(measurements: Mapping[tuple[str, int], Mapping[str, float]], target: str,
                        periods: Sequence[tuple[int, int]] = CORRELATION_PERIODS) -> CorrelationMatrix:
    """Pearson correlation of growth deltas between developmental periods.

    Only patients measured at every stage enter the matrix.
    """
    per = {}
    for p in periods:
        per[p] = {d.patient_id: d.value for d in growth_deltas(measurements, target, p).deltas}
    stages_by_pid: dict[str, set] = {}
    for pid, st in measurements:
        stages_by_pid.setdefault(pid, set()).add(st)
    pids = sorted(pid for pid, st in stages_by_pid.items() if set(STAGES) <= st)
    if len(pids) < 3:
        raise ValidationError(f"need at least 3 patients with all stages, have {len(pids)}")
    cols = np.array([[per[p][pid] for p in periods] for pid in pids])
    r, zero = pearson_matrix(cols)
    return CorrelationMatrix(target, tuple(periods), r, len(pids), tuple(periods[j] for j in zero))


def unanimous_filter(labels_by_target: Mapping[str, Mapping[str, int]], cls: int) -> Callable[[str], bool]:
    """Patients that fall in ``cls`` for every target."""
    def accept(pid: str) -> bool:
        return all(lbl.get(pid) == cls for lbl in labels_by_target.values())
    accept.description = f"class {CLASS_NAMES[cls]} for all of {sorted(labels_by_target)}"
    return accept


def mean_trajectories(cohort: Cohort, accept: Callable[[str], bool], stages: Sequence[int] = (9, 12, 18)) -> dict:
    """Mean Sella-Nasion-frame landmark positions per stage over the accepted patients."""
    members = [s for s in cohort.series if accept(s.patient_id) and all(st in s.by_stage for st in stages)]
    if not members:
        desc = getattr(accept, "description", repr(accept))
        raise ValidationError(f"no patients match group filter ({desc})")
    means = {}
    for st in stages:
        coords = np.stack([transform_to_sn_frame(s[st]) for s in members])
        means[st] = coords.mean(axis=0)
    names = cohort.schema.names
    return {
        "n_patients": len(members),
        "patient_ids": [s.patient_id for s in members],
        "stages": list(stages),
        "landmarks": {
            name: {str(st): [float(means[st][i, 0]), float(means[st][i, 1])] for st in stages}
            for i, name in enumerate(names)
        },
        "_arrays": means,
    }
