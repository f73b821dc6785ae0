"""Landmark normalization: Procrustes superimposition, Sella-Nasion frame, scale diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .data_model import Cephalogram, Cohort, ValidationError


class SimilarityTransform(NamedTuple):
    """x -> scale * R(angle) @ x + translation."""

    scale: float
    angle: float
    translation: tuple[float, float]

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return self.scale * (np.asarray(pts, float) @ rotation_matrix(self.angle).T) + np.asarray(self.translation)


class RotationFit(NamedTuple):
    angle: float
    degenerate: bool


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate(pts: np.ndarray, angle: float) -> np.ndarray:
    return np.asarray(pts, float) @ rotation_matrix(angle).T


def optimal_rotation(a: np.ndarray, b: np.ndarray) -> RotationFit:
    """Angle of the proper rotation R minimising sum ||R a_i - b_i||^2.

    Both configurations must already be centred. When the cross and dot sums
    both vanish every angle is optimal; the fit reports angle 0 and flags it.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    cross = float(np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))
    dot = float(np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
    if cross == 0.0 and dot == 0.0:
        return RotationFit(0.0, True)
    return RotationFit(math.atan2(cross, dot), False)


def sum_of_distances(pts: np.ndarray) -> float:
    return float(np.sum(np.hypot(pts[:, 0], pts[:, 1])))


def centroid_size(pts: np.ndarray) -> float:
    """Sum of landmark distances to the centroid (the size used for normalization)."""
    pts = np.asarray(pts, float)
    return sum_of_distances(pts - pts.mean(axis=0))


def normalize_shape(pts: np.ndarray, label=None) -> tuple[np.ndarray, float, np.ndarray]:
    """Centre at the origin and rescale so the distances to the origin sum to one."""
    pts = np.asarray(pts, float)
    centre = pts.mean(axis=0)
    centred = pts - centre
    size = sum_of_distances(centred)
    if not size > 0 or not math.isfinite(size):
        raise ValidationError(f"degenerate shape {label if label is not None else ''}: all landmarks coincide".strip())
    out = centred / size
    # second pass removes the residual rounding in centroid and norm
    out -= out.mean(axis=0)
    out /= sum_of_distances(out)
    return out, size, centre


@dataclass(frozen=True)
class ProcrustesResult:
    aligned: np.ndarray          # (n_shapes, n_landmarks, 2)
    mean: np.ndarray             # (n_landmarks, 2)
    residual: float              # sum over shapes of ||shape - mean||^2
    iterations: int
    converged: bool
    transforms: tuple[SimilarityTransform, ...]  # raw -> aligned, per shape
    sizes: np.ndarray            # original centroid sizes


def procrustes_align(shapes: Sequence[np.ndarray] | np.ndarray, tol: float = 1e-10,
                     max_iter: int = 100, labels: Sequence | None = None) -> ProcrustesResult:
    """Generalized Procrustes superimposition with a sum-of-distances size norm.

    Every shape is centred and scaled to unit sum of landmark distances to the
    origin, then rotated (proper rotations only) towards the running mean
    until the mean moves less than ``tol`` or ``max_iter`` passes have run.
    """
    shapes = np.asarray(shapes, dtype=float)
    if shapes.ndim != 3 or shapes.shape[0] < 1 or shapes.shape[2] != 2:
        raise ValueError(f"expected an (n_shapes, n_landmarks, 2) array, got shape {shapes.shape}")
    n = shapes.shape[0]
    normed = np.empty_like(shapes)
    sizes = np.empty(n)
    centres = np.empty((n, 2))
    for i in range(n):
        label = labels[i] if labels is not None else i
        normed[i], sizes[i], centres[i] = normalize_shape(shapes[i], label)

    angles = np.zeros(n)
    aligned = normed.copy()
    mean = aligned[0].copy()
    converged = n == 1
    it = 0
    if n > 1:
        for it in range(1, max_iter + 1):
            for i in range(n):
                fit = optimal_rotation(normed[i], mean)
                angles[i] = fit.angle
                aligned[i] = rotate(normed[i], fit.angle)
            new_mean = aligned.mean(axis=0)
            shift = float(np.max(np.abs(new_mean - mean)))
            mean = new_mean
            if shift < tol:
                converged = True
                break
    else:
        mean = aligned.mean(axis=0)
    residual = float(np.sum((aligned - mean) ** 2))
    transforms = []
    for i in range(n):
        s = 1.0 / sizes[i]
        t = -s * rotate(centres[i][None, :], angles[i])[0]
        transforms.append(SimilarityTransform(s, float(angles[i]), (float(t[0]), float(t[1]))))
    return ProcrustesResult(aligned, mean, residual, it, converged, tuple(transforms), sizes)


def align_cohort(cohort: Cohort, mode: str = "joint", stages: Sequence[int] | None = None,
                 **kw) -> tuple[dict[tuple[str, int], np.ndarray], dict]:
    """Procrustes coordinates for every cephalogram of a cohort.

    ``mode="joint"`` superimposes all cephalograms together; ``"per_stage"``
    runs one superimposition per developmental stage.
    """
    keys, shapes = [], []
    for ceph in cohort.cephalograms():
        if stages is None or ceph.stage in stages:
            keys.append((ceph.patient_id, ceph.stage))
            shapes.append(ceph.coords)
    if not keys:
        raise ValidationError("no cephalograms to align")
    if mode == "joint":
        groups = {None: list(range(len(keys)))}
    elif mode == "per_stage":
        groups = {}
        for i, (_, st) in enumerate(keys):
            groups.setdefault(st, []).append(i)
    else:
        raise ValueError(f"unknown alignment mode {mode!r}")
    out: dict[tuple[str, int], np.ndarray] = {}
    diag = {"mode": mode, "groups": []}
    for g, idx in groups.items():
        res = procrustes_align([shapes[i] for i in idx], labels=[keys[i] for i in idx], **kw)
        for j, i in enumerate(idx):
            out[keys[i]] = res.aligned[j]
        diag["groups"].append({
            "stage": g, "n_shapes": len(idx), "iterations": res.iterations,
            "converged": res.converged, "residual": res.residual,
        })
    return out, diag


def sn_frame_transform(ceph: Cephalogram) -> tuple[float, np.ndarray]:
    """Rotation angle and Sella position that put Sella at the origin, Nasion on +y."""
    s = np.asarray(ceph.point("Sella"), float)
    n = np.asarray(ceph.point("Nasion"), float)
    d = n - s
    if d[0] == 0.0 and d[1] == 0.0:
        raise ValidationError(f"Sella and Nasion coincide in {ceph.patient_id}/{ceph.stage}")
    angle = math.pi / 2 - math.atan2(d[1], d[0])
    return angle, s


def transform_to_sn_frame(ceph: Cephalogram) -> np.ndarray:
    """Rigid motion putting Sella at (0, 0) and Nasion straight above it. No scaling."""
    angle, s = sn_frame_transform(ceph)
    out = rotate(ceph.coords - s, angle)
    si, ni = ceph.schema.index("Sella"), ceph.schema.index("Nasion")
    out[si] = 0.0
    # rotation of an exactly-vertical vector can leave ~1e-16 of x; pin it
    out[ni, 0] = 0.0
    return out


def find_scale_modes(sizes: Sequence[float], gap: float = 0.1, min_fraction: float = 0.02) -> list[dict]:
    """Group sizes into clusters separated by relative gaps larger than ``gap`` (in log units)."""
    logs = np.sort(np.log(np.asarray(sizes, float)))
    if logs.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(logs) > gap)
    clusters = np.split(logs, breaks + 1)
    out = []
    for c in clusters:
        if c.size / logs.size < min_fraction:
            continue
        out.append({"mode": float(np.exp(np.median(c))), "count": int(c.size),
                    "min": float(np.exp(c[0])), "max": float(np.exp(c[-1]))})
    return out


def scale_diagnostics(cohort: Cohort, bins: int = 30,
                      cloud_landmarks: Sequence[str] = ("Nasion", "PointA", "Pogonion", "Menton", "GonionInferior"),
                      stages: Sequence[int] = (9, 12, 18)) -> dict:
    """Centroid sizes, a log-size histogram with cluster summary, and SN-frame coordinate clouds."""
    if len(cohort) == 0:
        raise ValidationError("cohort is empty")
    keys, sizes = [], []
    clouds: dict[str, dict[str, list]] = {name: {str(st): [] for st in stages} for name in cloud_landmarks}
    for ceph in cohort.cephalograms():
        keys.append((ceph.patient_id, ceph.stage))
        sizes.append(centroid_size(ceph.coords))
        if ceph.stage in stages:
            sn = transform_to_sn_frame(ceph)
            for name in cloud_landmarks:
                x, y = sn[ceph.schema.index(name)]
                clouds[name][str(ceph.stage)].append([float(x), float(y)])
    sizes_arr = np.asarray(sizes)
    counts, edges = np.histogram(np.log(sizes_arr), bins=bins)
    return {
        "sizes": [{"patient_id": p, "stage": st, "size": float(v)} for (p, st), v in zip(keys, sizes_arr)],
        "histogram": {"log_size_edges": edges.tolist(), "counts": counts.tolist()},
        "modes": find_scale_modes(sizes_arr),
        "clouds": clouds,
    }
