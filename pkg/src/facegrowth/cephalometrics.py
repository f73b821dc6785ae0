"""Cephalometric measurements computed from raw landmark coordinates.

Angles are in degrees, linear measures in image (pixel) units. The three
growth measurements are SN/MP, FA and PN-AN; the default panel adds twelve
more angles and ratios that are invariant to image scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .data_model import Cephalogram, Cohort, ValidationError

TARGETS = ("SN-MP", "FA", "PN-AN")


def _vec(p, q) -> tuple[float, float]:
    return float(q[0]) - float(p[0]), float(q[1]) - float(p[1])


def line_angle(p1, p2, q1, q2) -> float:
    """Angle in degrees between the directed vectors p1->p2 and q1->q2.

    Equivalent to the arccosine of the normalized dot product, evaluated as
    atan2(|cross|, dot) which keeps full precision near 0 and 180 degrees.
    """
    ux, uy = _vec(p1, p2)
    vx, vy = _vec(q1, q2)
    if (ux == 0.0 and uy == 0.0) or (vx == 0.0 and vy == 0.0):
        raise ValidationError("zero-length vector in angle measurement")
    return math.degrees(math.atan2(abs(ux * vy - uy * vx), ux * vx + uy * vy))


def fold(angle: float) -> float:
    """Undirected-line convention: map [0, 180] onto [0, 90]."""
    return 180.0 - angle if angle > 90.0 else angle


def vertex_angle(a, vertex, b) -> float:
    return line_angle(vertex, a, vertex, b)


def distance(p, q) -> float:
    dx, dy = _vec(p, q)
    return math.hypot(dx, dy)


def _pt(ceph: Cephalogram, name: str) -> np.ndarray:
    try:
        return ceph.point(name)
    except KeyError:
        raise ValidationError(f"landmark {name} missing from {ceph.patient_id}/{ceph.stage}") from None


def sn_mp(ceph: Cephalogram) -> float:
    return fold(line_angle(_pt(ceph, "Sella"), _pt(ceph, "Nasion"),
                           _pt(ceph, "GonionInferior"), _pt(ceph, "Menton")))


def fa(ceph: Cephalogram) -> float:
    return fold(line_angle(_pt(ceph, "Basion"), _pt(ceph, "Nasion"),
                           _pt(ceph, "Pterygomaxillare"), _pt(ceph, "Gnathion")))


def pn_an(ceph: Cephalogram) -> float:
    """Signed Pogonion minus Point A distance to the Nasion perpendicular of Frankfort.

    Distances are measured along the unit Porion->Orbitale direction, so
    positive means anterior of the line through Nasion.
    """
    po, orb = _pt(ceph, "Porion"), _pt(ceph, "Orbitale")
    ux, uy = _vec(po, orb)
    norm = math.hypot(ux, uy)
    if norm == 0.0:
        raise ValidationError(f"Porion and Orbitale coincide in {ceph.patient_id}/{ceph.stage}")
    ux, uy = ux / norm, uy / norm
    n = _pt(ceph, "Nasion")
    px, py = _vec(n, _pt(ceph, "Pogonion"))
    ax, ay = _vec(n, _pt(ceph, "PointA"))
    return (px * ux + py * uy) - (ax * ux + ay * uy)


@dataclass(frozen=True)
class Measurement:
    """One panel entry: ``kind`` selects the formula, ``args`` name the landmarks.

    kinds: ``line`` (folded angle between p1->p2 and q1->q2), ``vertex``
    (angle a-vertex-b in [0, 180]), ``ratio`` (|a b| / |c d|), ``pn_an``.
    """

    name: str
    kind: str
    args: tuple[str, ...] = ()
    linear: bool = False

    def __call__(self, ceph: Cephalogram) -> float:
        p = [_pt(ceph, a) for a in self.args]
        if self.kind == "line":
            return fold(line_angle(*p))
        if self.kind == "vertex":
            return vertex_angle(*p)
        if self.kind == "ratio":
            den = distance(p[2], p[3])
            if den == 0.0:
                raise ValidationError("zero-length denominator")
            return distance(p[0], p[1]) / den
        if self.kind == "pn_an":
            return pn_an(ceph)
        raise ValueError(f"unknown measurement kind {self.kind!r}")


FH = ("Porion", "Orbitale")

DEFAULT_PANEL: tuple[Measurement, ...] = (
    Measurement("SN-MP", "line", ("Sella", "Nasion", "GonionInferior", "Menton")),
    Measurement("FA", "line", ("Basion", "Nasion", "Pterygomaxillare", "Gnathion")),
    Measurement("PN-AN", "pn_an", (), linear=True),
    Measurement("SNA", "vertex", ("Sella", "Nasion", "PointA")),
    Measurement("SNPog", "vertex", ("Sella", "Nasion", "Pogonion")),
    Measurement("NSBa", "vertex", ("Nasion", "Sella", "Basion")),
    Measurement("Convexity", "vertex", ("Nasion", "PointA", "Pogonion")),
    Measurement("FMA", "line", FH + ("GonionInferior", "Menton")),
    Measurement("Y-axis", "line", ("Sella", "Gnathion") + FH),
    Measurement("SN-FH", "line", ("Sella", "Nasion") + FH),
    Measurement("BaN-FH", "line", ("Basion", "Nasion") + FH),
    Measurement("PtmA-FH", "line", ("Pterygomaxillare", "PointA") + FH),
    Measurement("FacialHeightRatio", "ratio", ("Sella", "GonionInferior", "Nasion", "Menton")),
    Measurement("JawRatio", "ratio", ("GonionInferior", "Menton", "Sella", "Nasion")),
    Measurement("ChinAngle", "vertex", ("Pogonion", "Gnathion", "Menton")),
)

CENTRAL_PANEL = DEFAULT_PANEL[:3]

TARGET_FUNCS: Mapping[str, Callable[[Cephalogram], float]] = {"SN-MP": sn_mp, "FA": fa, "PN-AN": pn_an}


@dataclass(frozen=True)
class MeasurementPanel:
    entries: tuple[Measurement, ...] = DEFAULT_PANEL

    def __post_init__(self):
        names = [m.name for m in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate measurement names in panel")
        for t in TARGETS:
            if t not in names:
                raise ValueError(f"panel must contain {t}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.entries)

    def __len__(self):
        return len(self.entries)


def measure_panel(ceph: Cephalogram, panel: MeasurementPanel | Sequence[Measurement] = MeasurementPanel()) -> dict[str, float]:
    entries = panel.entries if isinstance(panel, MeasurementPanel) else tuple(panel)
    out = {}
    for m in entries:
        try:
            v = m(ceph)
        except ValidationError as exc:
            raise ValidationError(f"{m.name}: {exc}") from exc
        if not math.isfinite(v):
            raise ValidationError(f"{m.name}: non-finite value for {ceph.patient_id}/{ceph.stage}")
        out[m.name] = v
    return out


def measure_cohort(cohort: Cohort, panel: MeasurementPanel = MeasurementPanel()) -> dict[tuple[str, int], dict[str, float]]:
    """Panel values keyed by (patient_id, stage)."""
    return {(c.patient_id, c.stage): measure_panel(c, panel) for c in cohort.cephalograms()}
