"""Domain types and landmark CSV ingestion for longitudinal cephalometric data.

A landmark file holds one landmark per row::

    patient_id,study,stage,age_years,landmark,x,y

Rows are grouped into cephalograms by ``(patient_id, stage)`` and cephalograms
into patient series. Anything that cannot be incorporated ends up in the
:class:`IngestReport`, never silently dropped.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import statistics
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

STAGES = (9, 12, 15, 18)
PREDICTION_STAGES = (9, 12, 18)

REQUIRED_LANDMARKS = (
    "Sella",
    "Nasion",
    "Basion",
    "Porion",
    "Orbitale",
    "Pterygomaxillare",
    "PointA",
    "Pogonion",
    "Gnathion",
    "Menton",
    "GonionInferior",
)
DEFAULT_AUXILIARY_LANDMARKS = (
    "Articulare",
    "GonionPosterior",
    "PosteriorNasalSpine",
    "AnteriorNasalSpine",
    "PointB",
    "Condylion",
    "Glabella",
    "SoftPogonion",
    "Ramus",
)

# (mean, std, min, max) of age per stage; 9/12/18 from the growth-study cohort
# table, 15 interpolated (no published figures for that group).
DEFAULT_AGE_WINDOWS: Mapping[int, tuple[float, float, float, float]] = MappingProxyType({
    9: (9.06, 0.45, 6.00, 10.92),
    12: (12.07, 0.39, 10.00, 13.75),
    15: (15.10, 0.60, 13.75, 16.99),
    18: (17.41, 1.71, 15.00, 28.42),
})

CSV_HEADER = ("patient_id", "study", "stage", "age_years", "landmark", "x", "y")


class ValidationError(ValueError):
    """Input data violates a domain invariant."""


@dataclass(frozen=True)
class LandmarkSchema:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            dupes = sorted({n for n in self.names if self.names.count(n) > 1})
            raise ValidationError(f"duplicate landmark names in schema: {dupes}")
        missing = [n for n in REQUIRED_LANDMARKS if n not in self.names]
        if missing:
            raise ValidationError(f"schema lacks required landmarks: {missing}")
        object.__setattr__(self, "_index", MappingProxyType({n: i for i, n in enumerate(self.names)}))

    @classmethod
    def default(cls, auxiliary: Sequence[str] = DEFAULT_AUXILIARY_LANDMARKS) -> "LandmarkSchema":
        return cls(tuple(REQUIRED_LANDMARKS) + tuple(auxiliary))

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"landmark {name!r} not in schema") from None

    def __contains__(self, name) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Cephalogram:
    """One radiograph: landmark coordinates in schema order plus metadata."""

    patient_id: str
    study: str
    stage: int
    age_years: float
    schema: LandmarkSchema
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValidationError(f"unknown stage {self.stage!r}")
        if not (self.age_years > 0 and math.isfinite(self.age_years)):
            raise ValidationError(f"age must be positive, got {self.age_years!r}")
        arr = np.array(self.coords, dtype=float)
        if arr.shape != (len(self.schema), 2):
            raise ValidationError(f"coords shape {arr.shape} does not match schema of {len(self.schema)}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"non-finite landmark coordinate in {self.patient_id}/{self.stage}")
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    def point(self, name: str) -> np.ndarray:
        return self.coords[self.schema.index(name)]

    @property
    def landmarks(self) -> dict[str, tuple[float, float]]:
        return {n: (float(x), float(y)) for n, (x, y) in zip(self.schema.names, self.coords)}

    def with_coords(self, coords: np.ndarray) -> "Cephalogram":
        return Cephalogram(self.patient_id, self.study, self.stage, self.age_years, self.schema, coords)


@dataclass(frozen=True)
class PatientSeries:
    patient_id: str
    by_stage: Mapping[int, Cephalogram]

    def __post_init__(self):
        stages = dict(sorted(self.by_stage.items()))
        for stage, ceph in stages.items():
            if ceph.stage != stage or ceph.patient_id != self.patient_id:
                raise ValidationError(f"cephalogram {ceph.patient_id}/{ceph.stage} filed under "
                                      f"{self.patient_id}/{stage}")
        missing = [s for s in PREDICTION_STAGES if s not in stages]
        if missing:
            raise ValidationError(f"patient {self.patient_id} lacks mandatory stages {missing}")
        object.__setattr__(self, "by_stage", MappingProxyType(stages))

    def __getitem__(self, stage: int) -> Cephalogram:
        return self.by_stage[stage]

    @property
    def stages(self) -> tuple[int, ...]:
        return tuple(self.by_stage)


@dataclass(frozen=True)
class Cohort:
    series: tuple[PatientSeries, ...]
    schema: LandmarkSchema

    def __post_init__(self):
        ordered = tuple(sorted(self.series, key=lambda s: s.patient_id))
        ids = [s.patient_id for s in ordered]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate patient ids in cohort")
        for s in ordered:
            for ceph in s.by_stage.values():
                if ceph.schema != self.schema:
                    raise ValidationError(f"cephalogram {ceph.patient_id}/{ceph.stage} uses a different schema")
        object.__setattr__(self, "series", ordered)

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self):
        return iter(self.series)

    @property
    def patient_ids(self) -> tuple[str, ...]:
        return tuple(s.patient_id for s in self.series)

    def cephalograms(self) -> Iterable[Cephalogram]:
        for s in self.series:
            yield from s.by_stage.values()


@dataclass(frozen=True)
class Rejection:
    lines: tuple[int, ...]
    reason: str

    def __str__(self):
        if len(self.lines) == 1:
            where = f"line {self.lines[0]}"
        else:
            where = f"lines {self.lines[0]}..{self.lines[-1]} ({len(self.lines)} rows)"
        return f"{where}: {self.reason}"


@dataclass
class IngestReport:
    rejects: list[Rejection] = field(default_factory=list)
    excluded: list[Rejection] = field(default_factory=list)
    incorporated_lines: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.rejects and not self.excluded

    def lines(self) -> list[str]:
        out = [f"reject {r}" for r in self.rejects]
        out += [f"exclude {r}" for r in self.excluded]
        return out

    def emit(self, stream=None, sidecar: str | Path | None = None):
        stream = sys.stderr if stream is None else stream
        text = "\n".join(self.lines())
        if text:
            print(text, file=stream)
        if sidecar is not None:
            Path(sidecar).write_text(text + ("\n" if text else ""), encoding="utf-8")


def _check_age_window(ceph: Cephalogram, windows, report: IngestReport):
    if windows is None or ceph.stage not in windows:
        return
    _, _, lo, hi = windows[ceph.stage]
    if not lo <= ceph.age_years <= hi:
        msg = (f"{ceph.patient_id} stage {ceph.stage}: age {ceph.age_years} outside "
               f"[{lo}, {hi}]")
        report.warnings.append(msg)
        log.warning(msg)


def parse_landmarks(text: str, schema: LandmarkSchema | None = None,
                    age_windows=DEFAULT_AGE_WINDOWS) -> tuple[Cohort, IngestReport]:
    """Parse landmark CSV text into a validated cohort and an itemized report."""
    schema = schema or LandmarkSchema.default()
    report = IngestReport()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty landmark file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ValidationError(f"bad header {header!r}; expected {','.join(CSV_HEADER)}")

    # (patient, stage) -> list of (line, study, age, landmark, x, y)
    records: dict[tuple[str, int], list] = defaultdict(list)
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            report.rejects.append(Rejection((lineno,), f"malformed row: expected {len(CSV_HEADER)} columns, got {len(row)}"))
            continue
        pid, study, stage_s, age_s, name, x_s, y_s = (c.strip() for c in row)
        try:
            stage = int(stage_s)
            age, x, y = float(age_s), float(x_s), float(y_s)
        except ValueError as exc:
            report.rejects.append(Rejection((lineno,), f"malformed row: {exc}"))
            continue
        if not pid:
            report.rejects.append(Rejection((lineno,), "malformed row: empty patient_id"))
            continue
        if stage not in STAGES:
            report.rejects.append(Rejection((lineno,), f"malformed row: stage {stage} not in {STAGES}"))
            continue
        if not all(math.isfinite(v) for v in (age, x, y)) or age <= 0:
            report.rejects.append(Rejection((lineno,), "malformed row: non-finite or non-positive value"))
            continue
        if name not in schema:
            report.rejects.append(Rejection((lineno,), f"unknown landmark name {name!r}"))
            continue
        records[(pid, stage)].append((lineno, study, age, name, x, y))

    cephs: dict[str, dict[int, tuple[Cephalogram, list[int]]]] = defaultdict(dict)
    for (pid, stage), rows in records.items():
        lines = tuple(r[0] for r in rows)
        names = [r[3] for r in rows]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            report.rejects.append(Rejection(lines, f"duplicate landmark {dupes} for {pid} stage {stage}"))
            continue
        if len({r[1] for r in rows}) > 1 or len({r[2] for r in rows}) > 1:
            report.rejects.append(Rejection(lines, f"inconsistent study/age within {pid} stage {stage}"))
            continue
        missing = [n for n in schema.names if n not in names]
        if missing:
            required = [n for n in missing if n in REQUIRED_LANDMARKS]
            kind = "missing required landmark" if required else "missing landmark"
            report.rejects.append(Rejection(lines, f"{kind} {required or missing} for {pid} stage {stage}"))
            continue
        coords = np.empty((len(schema), 2))
        for _, _, _, name, x, y in rows:
            coords[schema.index(name)] = (x, y)
        ceph = Cephalogram(pid, rows[0][1], stage, rows[0][2], schema, coords)
        _check_age_window(ceph, age_windows, report)
        cephs[pid][stage] = (ceph, list(lines))

    series = []
    for pid in sorted(cephs):
        stages = cephs[pid]
        missing = [s for s in PREDICTION_STAGES if s not in stages]
        if missing:
            lines = tuple(sorted(l for _, ls in stages.values() for l in ls))
            report.excluded.append(Rejection(lines, f"patient {pid} missing mandatory stage(s) {missing}"))
            continue
        series.append(PatientSeries(pid, {s: c for s, (c, _) in stages.items()}))
        report.incorporated_lines.extend(l for _, ls in stages.values() for l in ls)
    report.incorporated_lines.sort()
    return Cohort(tuple(series), schema), report


def ingest_landmarks(path: str | Path, schema: LandmarkSchema | None = None,
                     age_windows=DEFAULT_AGE_WINDOWS) -> tuple[Cohort, IngestReport]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_landmarks(text, schema, age_windows)


def format_float(v: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(v))


def landmarks_to_csv(cohort: Cohort) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in cohort.series:
        for stage, ceph in s.by_stage.items():
            for name, (x, y) in zip(cohort.schema.names, ceph.coords):
                w.writerow((ceph.patient_id, ceph.study, stage, format_float(ceph.age_years),
                            name, format_float(x), format_float(y)))
    return buf.getvalue()


def write_landmarks(cohort: Cohort, path: str | Path):
    Path(path).write_text(landmarks_to_csv(cohort), encoding="utf-8")


@dataclass(frozen=True)
class AgeStats:
    stage: int
    mean: float
    std: float
    min: float
    max: float
    count: int


def cohort_summary(cohort: Cohort) -> dict[int, AgeStats]:
    """Per-stage age statistics; std uses the sample (n-1) convention."""
    if len(cohort) == 0:
        raise ValidationError("cohort is empty")
    ages: dict[int, list[float]] = defaultdict(list)
    for ceph in cohort.cephalograms():
        ages[ceph.stage].append(ceph.age_years)
    out = {}
    for stage in sorted(ages):
        a = ages[stage]
        std = statistics.stdev(a) if len(a) > 1 else 0.0
        out[stage] = AgeStats(stage, statistics.fmean(a), std, min(a), max(a), len(a))
    return out
