"""Deterministic synthetic gaze traces with ground-truth events.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014) seeded with
the 64-bit ``seed``; each normal deviate pair is drawn with the Box-Muller
transform from two uniforms ``u = ((z >> 11) + 1) / 2**53``. The sequence
is therefore reproducible in any language with 64-bit integers.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import DisplayGeometry, Recording, visual_angle_to_pixels

_MASK = (1 << 64) - 1

# 530 mm x 1920 px display viewed from 600 mm, square pixels
DEFAULT_GEOMETRY = DisplayGeometry(530.0, 298.125, 1920, 1080, 600.0)
DEFAULT_PUPIL_MM = 3.5


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK
        self._spare = None

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform on (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * (1.0 / (1 << 53))

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1, u2 = self.uniform(), self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class Fixate:
    point: tuple
    duration_ms: float


@dataclass(frozen=True)
class SaccadeTo:
    point: tuple
    duration_ms: float


@dataclass(frozen=True)
class BlinkSegment:
    duration_ms: float


@dataclass(frozen=True)
class Pursuit:
    start: tuple
    end: tuple
    duration_ms: float


Segment = Union[Fixate, SaccadeTo, BlinkSegment, Pursuit]


@dataclass(frozen=True)
class TraceSpec:
    segments: tuple
    sampling_rate_hz: float = 1000.0
    noise_sigma_deg: float = 0.0
    seed: int = 0
    geometry: DisplayGeometry = DEFAULT_GEOMETRY

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.sampling_rate_hz > 0:
            raise ValueError("sampling_rate_hz must be positive")
        if self.noise_sigma_deg < 0:
            raise ValueError("noise_sigma_deg must be non-negative")
        for seg in self.segments:
            if not seg.duration_ms > 0:
                raise ValueError(f"segment {seg!r} needs a positive duration")
            if self._count(seg) < 1:
                raise ValueError(f"segment {seg!r} is shorter than one sample")

    def _count(self, seg) -> int:
        return int(round(seg.duration_ms * self.sampling_rate_hz / 1000.0))


@dataclass(frozen=True)
class TruthEvent:
    kind: str  # fixation | saccade | blink | pursuit
    first: int  # sample indices, inclusive
    last: int
    onset: int  # us
    duration: int
    start: tuple
    end: tuple


def generate(spec: TraceSpec):
    """Synthesise samples segment by segment; returns (Recording, [TruthEvent]).

    Saccades sweep linearly from the current position and land exactly on
    their target at their last sample. Blinks are invalid samples. Noise is
    isotropic Gaussian with the given standard deviation in degrees.
    """
    rate = spec.sampling_rate_hz
    period = 1e6 / rate
    rng = SplitMix64(spec.seed)
    sigma_px = visual_angle_to_pixels(spec.noise_sigma_deg, spec.geometry) if spec.noise_sigma_deg > 0 else 0.0
    g = spec.geometry
    pos = (g.width_px / 2.0, g.height_px / 2.0)
    xs, ys, ok = [], [], []
    truth = []
    for seg in spec.segments:
        n = spec._count(seg)
        first = len(xs)
        start = pos
        if isinstance(seg, Fixate):
            pts = [tuple(seg.point)] * n
            kind = "fixation"
        elif isinstance(seg, SaccadeTo):
            x0, y0 = pos
            x1, y1 = seg.point
            pts = [(x0 + (x1 - x0) * (k + 1) / n, y0 + (y1 - y0) * (k + 1) / n) for k in range(n)]
            kind = "saccade"
        elif isinstance(seg, Pursuit):
            x0, y0 = seg.start
            x1, y1 = seg.end
            start = tuple(seg.start)
            den = max(n - 1, 1)
            pts = [(x0 + (x1 - x0) * k / den, y0 + (y1 - y0) * k / den) for k in range(n)]
            kind = "pursuit"
        elif isinstance(seg, BlinkSegment):
            pts = [None] * n
            kind = "blink"
        else:
            raise TypeError(f"unknown segment {seg!r}")
        for p in pts:
            if p is None:
                xs.append(math.nan)
                ys.append(math.nan)
                ok.append(False)
                continue
            if sigma_px:
                p = (p[0] + sigma_px * rng.normal(), p[1] + sigma_px * rng.normal())
            xs.append(p[0])
            ys.append(p[1])
            ok.append(True)
        if pts[-1] is not None:
            pos = tuple(seg.point) if isinstance(seg, (Fixate, SaccadeTo)) else tuple(seg.end)
        last = len(xs) - 1
        truth.append(TruthEvent(
            kind, first, last, int(round(first * period)),
            int(round((last + 1) * period)) - int(round(first * period)), start, pos,
        ))
    n_total = len(xs)
    t = np.array([int(round(k * period)) for k in range(n_total)], dtype=np.int64)
    valid = np.array(ok, dtype=bool)
    pupil = np.where(valid, DEFAULT_PUPIL_MM, np.nan)
    rec = Recording(
        t=t, x=np.array(xs), y=np.array(ys), pupil_left=pupil, pupil_right=pupil.copy(),
        valid_left=valid, valid_right=valid.copy(), sampling_rate_hz=rate, geometry=g,
    )
    return rec, truth


def _point(a, b):
    return (float(a), float(b))


def parse_segments(text: str) -> tuple:
    """One segment per line: ``fixate X Y MS``, ``saccade X Y MS``, ``blink MS`` or
    ``pursuit X0 Y0 X1 Y1 MS``."""
    segs = []
    for raw in text.replace(";", "\n").splitlines():
        parts = raw.split()
        if not parts:
            continue
        kind, args = parts[0].lower(), parts[1:]
        try:
            if kind == "fixate" and len(args) == 3:
                segs.append(Fixate(_point(*args[:2]), float(args[2])))
            elif kind in ("saccade", "saccade_to") and len(args) == 3:
                segs.append(SaccadeTo(_point(*args[:2]), float(args[2])))
            elif kind == "blink" and len(args) == 1:
                segs.append(BlinkSegment(float(args[0])))
            elif kind == "pursuit" and len(args) == 5:
                segs.append(Pursuit(_point(*args[:2]), _point(*args[2:4]), float(args[4])))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"cannot parse trace segment {raw.strip()!r}") from None
    return tuple(segs)


def trace_spec_from_config(parser: configparser.ConfigParser, section: str = "trace") -> TraceSpec:
    from .ingest import geometry_from_config

    sec = parser[section]
    kw = {}
    geometry = geometry_from_config(parser)
    if geometry is not None:
        kw["geometry"] = geometry
    return TraceSpec(
        segments=parse_segments(sec.get("segments", "")),
        sampling_rate_hz=sec.getfloat("sampling_rate_hz", 1000.0),
        noise_sigma_deg=sec.getfloat("noise_sigma_deg", 0.0),
        seed=sec.getint("seed", 0),
        **kw,
    )
