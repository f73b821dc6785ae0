"""Experiment scenarios and per-scenario feature tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .analysis import CLASS_NAMES
from .cephalometrics import TARGETS
from .data_model import Cohort

DATA_TYPES = ("ceph", "proc", "trans")
PERIOD_VARIANTS = ("9", "12", "12-9", "9,12", "9,12-9")
TARGET_LABELS = tuple(f"{t}(18-9)" for t in TARGETS)

AGE_NOTE = ("both ages are appended for two-timestamp variants (12-9, 9,12 and 9,12-9); "
            "a single-age treatment of 12-9 would give one feature fewer")


@dataclass(frozen=True, order=True)
class Scenario:
    data_type: str
    period: str
    target: str

    def __post_init__(self):
        if self.data_type not in DATA_TYPES:
            raise ValueError(f"unknown data type {self.data_type!r}")
        if self.period not in PERIOD_VARIANTS:
            raise ValueError(f"unknown period variant {self.period!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")

    @property
    def key(self) -> str:
        return f"{self.data_type}/{self.period}/{self.target}"

    @property
    def slug(self) -> str:
        return f"{self.data_type}_{self.period.replace(',', '+')}_{self.target}"

    @classmethod
    def parse(cls, key: str) -> "Scenario":
        parts = key.split("/")
        if len(parts) != 3:
            raise ValueError(f"scenario must look like 'ceph/12-9/SN-MP', got {key!r}")
        target = parts[2].removesuffix("(18-9)")
        return cls(parts[0], parts[1], target)

    def __str__(self):
        return self.key


def enumerate_scenarios() -> list[Scenario]:
    """All 45 (data type, period variant, target) combinations, target-major order."""
    return [Scenario(d, p, t) for t, p, d in product(TARGETS, PERIOD_VARIANTS, DATA_TYPES)]


def base_width(data_type: str, n_measurements: int = 15, n_landmarks: int = 20) -> int:
    return n_measurements if data_type == "ceph" else 2 * n_landmarks


def feature_width(scenario: Scenario, n_measurements: int = 15, n_landmarks: int = 20) -> int:
    b = base_width(scenario.data_type, n_measurements, n_landmarks)
    return {"9": b + 1, "12": b + 1, "12-9": b + 2, "9,12": 2 * b + 2, "9,12-9": 2 * b + 2}[scenario.period]


@dataclass(frozen=True)
class FeatureTable:
    scenario: Scenario
    patient_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    excluded: tuple[str, ...] = ()
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape != (len(self.patient_ids), len(self.feature_names)):
            raise ValueError("feature matrix shape does not match names/ids")
        if self.y.shape != (len(self.patient_ids),):
            raise ValueError("label vector length mismatch")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("feature table contains missing or non-finite values")
        self.X.flags.writeable = False
        self.y.flags.writeable = False

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("patient_id",) + self.feature_names + ("label",))
        for pid, row, lab in zip(self.patient_ids, self.X, self.y):
            w.writerow((pid, *(repr(float(v)) for v in row), CLASS_NAMES[int(lab)]))
        return buf.getvalue()


def _base_block(data_type: str, pid: str, stage: int, measurements, aligned, transformed, panel_names,
                landmark_names) -> tuple[np.ndarray, list[str]]:
    if data_type == "ceph":
        vals = measurements[(pid, stage)]
        return np.array([vals[n] for n in panel_names]), list(panel_names)
    src = aligned if data_type == "proc" else transformed
    arr = np.asarray(src[(pid, stage)], float).reshape(-1)
    names = [f"{n}.{c}" for n in landmark_names for c in ("x", "y")]
    return arr, names


def assemble(cohort: Cohort, aligned: Mapping[tuple[str, int], np.ndarray],
             measurements: Mapping[tuple[str, int], Mapping[str, float]],
             labels: Mapping[str, Mapping[str, int]], scenario: Scenario,
             transformed: Mapping[tuple[str, int], np.ndarray] | None = None,
             panel_names: Sequence[str] | None = None) -> FeatureTable:
    """Build the feature table of one scenario.

    ``labels`` maps target name to {patient_id: class code}; ``transformed``
    holds Sella-Nasion frame coordinates (computed from the cohort if omitted).
    Patients lacking any input are excluded and listed in the table.
    """
    from .geometry import transform_to_sn_frame

    landmark_names = cohort.schema.names
    if panel_names is None:
        first = next(iter(measurements.values()), None)
        panel_names = tuple(first) if first is not None else ()
    if transformed is None and scenario.data_type == "trans":
        transformed = {(c.patient_id, c.stage): transform_to_sn_frame(c) for c in cohort.cephalograms()}
    target_labels = labels[scenario.target]
    rows, ys, ids, excluded = [], [], [], []
    names: list[str] | None = None
    ages = {(c.patient_id, c.stage): c.age_years for c in cohort.cephalograms()}
    for s in cohort.series:
        pid = s.patient_id
        try:
            lab = target_labels[pid]
            b9, bn = _base_block(scenario.data_type, pid, 9, measurements, aligned, transformed,
                                 panel_names, landmark_names)
            b12, _ = _base_block(scenario.data_type, pid, 12, measurements, aligned, transformed,
                                 panel_names, landmark_names)
            a9, a12 = ages[(pid, 9)], ages[(pid, 12)]
        except KeyError:
            excluded.append(pid)
            continue
        p = scenario.period
        if p == "9":
            vec, nm = np.concatenate([b9, [a9]]), [f"{n}@9" for n in bn] + ["age@9"]
        elif p == "12":
            vec, nm = np.concatenate([b12, [a12]]), [f"{n}@12" for n in bn] + ["age@12"]
        elif p == "12-9":
            vec = np.concatenate([b12 - b9, [a9, a12]])
            nm = [f"{n}@12-9" for n in bn] + ["age@9", "age@12"]
        elif p == "9,12":
            vec = np.concatenate([b9, b12, [a9, a12]])
            nm = [f"{n}@9" for n in bn] + [f"{n}@12" for n in bn] + ["age@9", "age@12"]
        else:
            vec = np.concatenate([b9, b12 - b9, [a9, a12]])
            nm = [f"{n}@9" for n in bn] + [f"{n}@12-9" for n in bn] + ["age@9", "age@12"]
        if names is None:
            names = nm
        rows.append(vec)
        ys.append(lab)
        ids.append(pid)
    if names is None:
        n_meas = len(panel_names)
        names = [f"f{i}" for i in range(feature_width(scenario, n_meas, len(landmark_names)))]
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    y = np.array(ys, dtype=np.int64)
    meta = {"age_handling": AGE_NOTE}
    return FeatureTable(scenario, tuple(ids), tuple(names), X, y, tuple(excluded), meta)
