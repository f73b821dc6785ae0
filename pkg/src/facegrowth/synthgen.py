"""Synthetic longitudinal growth cohorts.

Each patient gets a base face (template plus morphological variation), chin
growth along a patient/period specific direction, global size growth with age,
a random acquisition transform per radiograph and landmark annotation noise.

The growth latent of period p is ``class_signal * shared + (1 - class_signal) * own_p``:
with ``class_signal=1`` every period grows the same way, with 0 the periods
are independent.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from .data_model import (
    DEFAULT_AGE_WINDOWS,
    STAGES,
    Cephalogram,
    Cohort,
    LandmarkSchema,
    PatientSeries,
    ValidationError,
)

PX_PER_MM = 10.0

# Template profile in mm: x anterior, y superior, Sella at the origin.
TEMPLATE_MM = {
    "Sella": (0.0, 0.0),
    "Nasion": (68.0, 12.0),
    "Basion": (-10.0, -42.0),
    "Porion": (-22.0, -20.0),
    "Orbitale": (50.0, -16.0),
    "Pterygomaxillare": (16.0, -36.0),
    "PointA": (64.0, -48.0),
    "Pogonion": (60.0, -100.0),
    "Gnathion": (56.0, -106.0),
    "Menton": (48.0, -110.0),
    "GonionInferior": (-4.0, -82.0),
    "Articulare": (-14.0, -30.0),
    "GonionPosterior": (-10.0, -72.0),
    "PosteriorNasalSpine": (18.0, -44.0),
    "AnteriorNasalSpine": (68.0, -40.0),
    "PointB": (58.0, -84.0),
    "Condylion": (-12.0, -22.0),
    "Glabella": (72.0, 24.0),
    "SoftPogonion": (72.0, -104.0),
    "Ramus": (-9.0, -52.0),
}

# How strongly a chin displacement carries over to each landmark.
MANDIBLE_WEIGHTS = {
    "Pogonion": 1.0, "Gnathion": 1.0, "Menton": 1.0, "SoftPogonion": 1.0, "PointB": 0.9,
    "GonionInferior": 0.35, "GonionPosterior": 0.3, "Ramus": 0.2, "Articulare": 0.05,
}
MAXILLA_WEIGHTS = {"PointA": 1.0, "AnteriorNasalSpine": 1.0, "PosteriorNasalSpine": 0.6, "Pterygomaxillare": 0.3}

GROWTH_PERIODS = ((9, 12), (12, 15), (15, 18))


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 639
    seed: int = 0
    class_signal: float = 0.5
    # (mean, std, min, max) per stage
    stage_age_models: Mapping[int, tuple[float, float, float, float]] = field(
        default_factory=lambda: dict(DEFAULT_AGE_WINDOWS))
    scale_levels: tuple[float, ...] = (1.0, 1.2, 1.45, 1.7)
    # one acquisition transform per radiograph (True) or per patient (False)
    transform_per_stage: bool = True
    rotation_std_deg: float = 4.0
    translation_std: float = 60.0
    image_offset: tuple[float, float] = (1200.0, 1400.0)
    landmark_noise_std: float = 2.0          # px, per radiograph
    # weights of the horizontal / mixed / vertical prototype growth latents
    growth_model: tuple[float, float, float] = (1 / 6, 2 / 3, 1 / 6)
    prototype_centers: tuple[float, float, float] = (-1.5, 0.0, 1.5)
    prototype_std: float = 0.6
    growth_magnitude_mm: float = 4.0         # chin displacement per 3-year period
    growth_direction_deg: float = -50.0      # mean chin growth direction
    direction_spread_deg: float = 35.0       # direction change per unit latent
    maxilla_growth_mm: float = 1.5
    maxilla_noise_mm: float = 0.5
    age_growth_rate: float = 0.01            # relative size increase per year
    base_mandible_std_mm: float = 6.0
    base_landmark_std_mm: float = 1.5
    base_size_std: float = 0.04
    include_s15: bool = True
    studies: tuple[str, ...] = ("synth-A", "synth-B", "synth-C")

    def __post_init__(self):
        if int(self.n_patients) < 1:
            raise ValidationError("n_patients must be >= 1")
        if not self.scale_levels or any(not s > 0 for s in self.scale_levels):
            raise ValidationError(f"scale levels must be positive, got {self.scale_levels}")
        if not 0.0 <= self.class_signal <= 1.0:
            raise ValidationError(f"class_signal must lie in [0, 1], got {self.class_signal}")
        w = self.growth_model
        if len(w) != 3 or any(x < 0 for x in w) or sum(w) <= 0:
            raise ValidationError(f"bad growth_model weights {w}")
        if not self.studies:
            raise ValidationError("need at least one study name")
        for st in STAGES:
            if st not in self.stage_age_models:
                raise ValidationError(f"no age model for stage {st}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown synth config keys: {unknown}")
        kw = dict(d)
        for k in ("scale_levels", "growth_model", "prototype_centers", "studies", "image_offset"):
            if k in kw:
                kw[k] = tuple(kw[k])
        if "stage_age_models" in kw:
            kw["stage_age_models"] = {int(k): tuple(v) for k, v in kw["stage_age_models"].items()}
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_age_models"] = {str(k): list(v) for k, v in self.stage_age_models.items()}
        return d


@dataclass(frozen=True)
class PatientTruth:
    shared: float
    prototype: int
    latents: tuple[float, float, float]   # per growth period


def _truncated_normal(rng: np.random.Generator, mean, std, lo, hi) -> float:
    if std <= 0:
        return float(min(max(mean, lo), hi))
    for _ in range(1000):
        v = rng.normal(mean, std)
        if lo <= v <= hi:
            return float(v)
    return float(min(max(mean, lo), hi))


def _weights(schema: LandmarkSchema, table: Mapping[str, float]) -> np.ndarray:
    return np.array([table.get(n, 0.0) for n in schema.names])[:, None]


def _direction(deg: float) -> np.ndarray:
    r = math.radians(deg)
    return np.array([math.cos(r), math.sin(r)])


def _patient(cfg: SynthConfig, idx: int, schema: LandmarkSchema, template: np.ndarray,
             w_mand: np.ndarray, w_max: np.ndarray):
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed), spawn_key=(int(idx),)))
    pid = f"P{idx + 1:04d}"
    study = cfg.studies[int(rng.integers(len(cfg.studies)))]
    n_lm = len(schema)

    proto = int(rng.choice(3, p=np.asarray(cfg.growth_model) / sum(cfg.growth_model)))
    shared = cfg.prototype_centers[proto] + cfg.prototype_std * rng.standard_normal()
    own = rng.standard_normal(3)
    cs = cfg.class_signal
    latents = tuple(float(cs * shared + (1.0 - cs) * e) for e in own)

    size = 1.0 + cfg.base_size_std * rng.standard_normal()
    base = template * size
    base = base + w_mand * (cfg.base_mandible_std_mm * rng.standard_normal(2))
    base = base + w_max * (0.5 * cfg.base_mandible_std_mm * rng.standard_normal(2))
    base = base + cfg.base_landmark_std_mm * rng.standard_normal((n_lm, 2))

    # cumulative growth displacement at each stage
    disp = {9: np.zeros((n_lm, 2))}
    cur = np.zeros((n_lm, 2))
    for (a, b), g in zip(GROWTH_PERIODS, latents):
        chin = cfg.growth_magnitude_mm * _direction(cfg.growth_direction_deg - cfg.direction_spread_deg * g)
        maxilla = cfg.maxilla_growth_mm * _direction(-60.0) + cfg.maxilla_noise_mm * rng.standard_normal(2)
        cur = cur + w_mand * chin + w_max * maxilla
        disp[b] = cur

    stages = STAGES if cfg.include_s15 else tuple(s for s in STAGES if s != 15)
    ages = {st: _truncated_normal(rng, *cfg.stage_age_models[st]) for st in STAGES}

    def acquisition():
        scale = float(cfg.scale_levels[int(rng.integers(len(cfg.scale_levels)))])
        rot = math.radians(cfg.rotation_std_deg * rng.standard_normal())
        shift = np.asarray(cfg.image_offset) + cfg.translation_std * rng.standard_normal(2)
        return scale, rot, shift

    patient_acq = acquisition()
    cephs = {}
    for st in STAGES:
        acq = acquisition() if cfg.transform_per_stage else patient_acq
        noise = cfg.landmark_noise_std * rng.standard_normal((n_lm, 2))
        if st not in stages:
            continue
        shape_mm = (base + disp[st]) * (1.0 + cfg.age_growth_rate * (ages[st] - ages[9]))
        scale, rot, shift = acq
        c, s = math.cos(rot), math.sin(rot)
        R = np.array([[c, -s], [s, c]])
        px = scale * PX_PER_MM * (shape_mm @ R.T) + shift + noise
        cephs[st] = Cephalogram(pid, study, st, round(ages[st], 2), schema, px)
    return PatientSeries(pid, cephs), PatientTruth(float(shared), proto, latents)


def generate_with_truth(config: SynthConfig, schema: LandmarkSchema | None = None) -> tuple[Cohort, dict[str, PatientTruth]]:
    schema = schema or LandmarkSchema.default()
    missing = [n for n in schema.names if n not in TEMPLATE_MM]
    if missing:
        raise ValidationError(f"no template position for landmarks {missing}")
    if len(schema) == 0:
        raise ValidationError("schema has no landmarks")
    template = np.array([TEMPLATE_MM[n] for n in schema.names], dtype=float)
    w_mand = _weights(schema, MANDIBLE_WEIGHTS)
    w_max = _weights(schema, MAXILLA_WEIGHTS)
    series, truth = [], {}
    for i in range(int(config.n_patients)):
        s, t = _patient(config, i, schema, template, w_mand, w_max)
        series.append(s)
        truth[s.patient_id] = t
    return Cohort(tuple(series), schema), truth


def generate(config: SynthConfig, schema: LandmarkSchema | None = None) -> Cohort:
    return generate_with_truth(config, schema)[0]
