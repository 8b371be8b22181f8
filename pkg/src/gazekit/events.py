"""Fixation, saccade and blink detection plus event statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .ingest import invalid_runs
from .model import (
    Blink, DisplayGeometry, EyePolicy, Fixation, Recording, Saccade,
    pixels_to_degrees, sample_duration, visual_angle_to_pixels,
)

GAP, FIXATION, SACCADE = 0, 1, 2


@dataclass(frozen=True)
class IvtConfig:
    velocity_threshold: float = 30.0  # deg/s, px/s without geometry
    min_fixation_duration_ms: float = 100.0
    amplitude_mode: str = "centroid"  # or "samples"

    def __post_init__(self):
        if not (self.velocity_threshold > 0 and self.min_fixation_duration_ms > 0):
            raise ValueError("I-VT thresholds must be positive")
        if self.amplitude_mode not in ("centroid", "samples"):
            raise ValueError(f"amplitude_mode must be centroid or samples, got {self.amplitude_mode!r}")


@dataclass(frozen=True)
class IdtConfig:
    dispersion_threshold: float = 1.0  # deg, px without geometry
    duration_threshold_ms: float = 100.0

    def __post_init__(self):
        if not (self.dispersion_threshold > 0 and self.duration_threshold_ms > 0):
            raise ValueError("I-DT thresholds must be positive")


@dataclass(frozen=True)
class VelocityTrace:
    t: np.ndarray
    values: np.ndarray  # NaN where undefined
    unit: str  # "deg/s" or "px/s"


def _distance(dx, dy, geometry):
    if geometry is None:
        return np.hypot(dx, dy)
    return pixels_to_degrees(dx, dy, geometry)


def point_to_point_velocity(rec: Recording, policy=EyePolicy.AVERAGE) -> VelocityTrace:
    """Speed between each sample and its predecessor.

    Entry ``i`` covers samples ``i-1`` and ``i``; it is NaN for the first
    sample and wherever either sample is invalid.
    """
    if len(rec) < 2:
        raise ValueError("velocity needs at least two samples")
    valid = rec.valid(policy)
    dist = np.asarray(_distance(np.diff(rec.x), np.diff(rec.y), rec.geometry), dtype=float)
    dt = np.diff(rec.t) / 1e6
    v = np.full(len(rec), np.nan)
    pair_ok = valid[1:] & valid[:-1]
    v[1:][pair_ok] = dist[pair_ok] / dt[pair_ok]
    return VelocityTrace(rec.t, v, "px/s" if rec.geometry is None else "deg/s")


def _sample_velocity(v: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Per-sample velocity used for labelling.

    A valid sample without a backward velocity (first sample, or first after
    a gap) takes the forward velocity of its successor pair.
    """
    out = v.copy()
    lone = np.isnan(out) & valid
    lone[-1] = False
    idx = np.flatnonzero(lone)
    out[idx] = v[idx + 1]
    return out


def _runs(labels: np.ndarray, value: int):
    hit = labels == value
    if not hit.any():
        return []
    edges = np.diff(np.concatenate([[0], hit.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1).tolist(), (np.flatnonzero(edges == -1) - 1).tolist()))


def _off_stimulus(x, y, geometry: Optional[DisplayGeometry]) -> bool:
    if geometry is None:
        return False
    return not (0 <= x < geometry.width_px and 0 <= y < geometry.height_px)


def _fixation(rec: Recording, first: int, last: int, pupil: np.ndarray) -> Fixation:
    cx = float(np.mean(rec.x[first:last + 1]))
    cy = float(np.mean(rec.y[first:last + 1]))
    p = pupil[first:last + 1]
    p = p[~np.isnan(p)]
    return Fixation(
        cx, cy, int(rec.t[first]), sample_duration(rec.t, first, last, rec.period_us),
        mean_pupil=float(p.mean()) if len(p) else None,
        off_stimulus=_off_stimulus(cx, cy, rec.geometry),
    )


def ivt_labels(rec: Recording, threshold: float, policy=EyePolicy.AVERAGE):
    """Label every sample GAP, FIXATION or SACCADE; also returns per-sample velocity."""
    valid = rec.valid(policy)
    vel = _sample_velocity(point_to_point_velocity(rec, policy).values, valid)
    labels = np.full(len(rec), GAP, dtype=np.int8)
    known = valid & ~np.isnan(vel)
    labels[known & (vel < threshold)] = FIXATION
    labels[known & (vel >= threshold)] = SACCADE
    return labels, vel


def detect_ivt(rec: Recording, cfg: IvtConfig = IvtConfig(), policy=EyePolicy.AVERAGE):
    """Velocity-threshold identification.

    Consecutive fixation-labelled samples are collapsed into candidate
    fixations and candidates shorter than the minimum duration dropped.
    Between two consecutive retained fixations, the saccade-labelled
    samples form one saccade provided no invalid sample intervenes.
    """
    if len(rec) < 2 or not rec.valid(policy).any():
        return [], []
    labels, vel = ivt_labels(rec, cfg.velocity_threshold, policy)
    pupil = rec.pupil(policy)
    min_us = cfg.min_fixation_duration_ms * 1000.0
    spans = [
        (a, b) for a, b in _runs(labels, FIXATION)
        if sample_duration(rec.t, a, b, rec.period_us) >= min_us
    ]
    fixations = [_fixation(rec, a, b, pupil) for a, b in spans]
    saccades = []
    for (a0, b0), (a1, b1), f0, f1 in zip(spans, spans[1:], fixations, fixations[1:]):
        between = labels[b0 + 1:a1]
        if len(between) == 0 or (between == GAP).any():
            continue
        members = np.flatnonzero(between == SACCADE) + b0 + 1
        if len(members) == 0:
            continue
        first, last = int(members[0]), int(members[-1])
        if cfg.amplitude_mode == "centroid":
            sx, sy, ex, ey = f0.centroid_x, f0.centroid_y, f1.centroid_x, f1.centroid_y
        else:
            sx, sy = float(rec.x[first - 1]), float(rec.y[first - 1])
            ex, ey = float(rec.x[last]), float(rec.y[last])
        saccades.append(Saccade(
            sx, sy, ex, ey, int(rec.t[first]), sample_duration(rec.t, first, last, rec.period_us),
            amplitude=float(_distance(ex - sx, ey - sy, rec.geometry)),
            peak_velocity=float(np.max(vel[members])),
        ))
    return fixations, saccades


def idt_threshold_px(rec: Recording, cfg: IdtConfig) -> float:
    if rec.geometry is None:
        return float(cfg.dispersion_threshold)
    return float(visual_angle_to_pixels(cfg.dispersion_threshold, rec.geometry))


def detect_idt(rec: Recording, cfg: IdtConfig = IdtConfig(), policy=EyePolicy.AVERAGE):
    """Dispersion-threshold identification.

    The dispersion threshold is converted to pixels once (horizontal pitch)
    when geometry is known, and compared with
    ``(max x - min x) + (max y - min y)`` over the window.
    """
    min_us = cfg.duration_threshold_ms * 1000.0
    if math.ceil(min_us / rec.period_us - 1e-9) < 2:
        raise ValueError(
            f"duration threshold {cfg.duration_threshold_ms} ms spans fewer than two samples "
            f"at {rec.sampling_rate_hz} Hz"
        )
    if len(rec) == 0:
        return []
    valid = rec.valid(policy)
    windows = kernels.idt_windows(
        rec.x, rec.y, valid, rec.t, rec.period_us, idt_threshold_px(rec, cfg), min_us,
    )
    pupil = rec.pupil(policy)
    return [_fixation(rec, a, b, pupil) for a, b in windows]


def detect_blinks(rec: Recording, min_ms: float = 75.0, max_ms: float = 500.0, policy=EyePolicy.AVERAGE):
    """Maximal invalid runs whose duration lies in ``[min_ms, max_ms]``."""
    if not min_ms < max_ms:
        raise ValueError("min_ms must be smaller than max_ms")
    if len(rec) == 0:
        return []
    out = []
    for first, last in invalid_runs(rec.valid(policy)):
        d = sample_duration(rec.t, first, last, rec.period_us)
        if min_ms * 1000.0 <= d <= max_ms * 1000.0:
            out.append(Blink(int(rec.t[first]), d))
    return out


@dataclass(frozen=True)
class Stats:
    """Descriptive statistics; population variance. All fields None when count is 0."""

    count: int
    mean: Optional[float] = None
    median: Optional[float] = None
    std: Optional[float] = None
    variance: Optional[float] = None

    @classmethod
    def of(cls, values) -> "Stats":
        v = np.asarray(list(values), dtype=float)
        if len(v) == 0:
            return cls(0)
        var = float(np.var(v))
        return cls(len(v), float(np.mean(v)), float(np.median(v)), math.sqrt(var), var)


@dataclass(frozen=True)
class EventSummary:
    fixation_duration_ms: Stats
    saccade_amplitude: Stats
    saccade_peak_velocity: Stats

    def to_dict(self) -> dict:
        return {
            name: vars(getattr(self, name))
            for name in ("fixation_duration_ms", "saccade_amplitude", "saccade_peak_velocity")
        }


def summarize_events(fixations: Sequence[Fixation] = (), saccades: Sequence[Saccade] = ()) -> EventSummary:
    return EventSummary(
        Stats.of(f.duration / 1000.0 for f in fixations),
        Stats.of(s.amplitude for s in saccades),
        Stats.of(s.peak_velocity for s in saccades),
    )


def validation_metrics(samples, target, geometry: Optional[DisplayGeometry], policy=EyePolicy.AVERAGE):
    """Accuracy and RMS precision, both in degrees, for gaze recorded on a known target.

    Accuracy is the mean angular offset of valid samples from ``target``;
    precision is the root mean square of the angular distances between
    successive valid samples.
    """
    if isinstance(samples, Recording):
        ok = samples.valid(policy)
        xs, ys = samples.x[ok], samples.y[ok]
    else:
        pts = [(s.gaze_x, s.gaze_y) for s in samples if s.is_valid(policy)]
        xs = np.array([p[0] for p in pts], dtype=float)
        ys = np.array([p[1] for p in pts], dtype=float)
    if len(xs) < 2:
        raise ValueError("validation metrics need at least two valid samples")
    offsets = np.asarray(pixels_to_degrees(xs - target[0], ys - target[1], geometry))
    steps = np.asarray(pixels_to_degrees(np.diff(xs), np.diff(ys), geometry))
    return float(np.mean(offsets)), float(np.sqrt(np.mean(steps ** 2)))
