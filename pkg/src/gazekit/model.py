"""Core gaze data types and screen/visual-angle conversions.

Time is carried in integer microseconds and position in stimulus pixels.
Angular quantities are derived on demand from a :class:`DisplayGeometry`.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

ANISOTROPY_TOLERANCE = 0.01
RATE_TOLERANCE = 0.10


class UnitUnavailableError(ValueError):
    """Raised when an angular quantity is requested without display geometry."""


class EyePolicy(str, enum.Enum):
    """How the two per-eye validity flags combine into one sample validity."""

    LEFT = "left"
    RIGHT = "right"
    AVERAGE = "average"
    STRICT_BOTH = "strict-both"


@dataclass(frozen=True)
class DisplayGeometry:
    width_mm: float
    height_mm: float
    width_px: int
    height_px: int
    viewing_distance_mm: float

    def __post_init__(self):
        for name in ("width_mm", "height_mm", "width_px", "height_px", "viewing_distance_mm"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"DisplayGeometry.{name} must be a positive number, got {value!r}")
        if self.is_anisotropic:
            warnings.warn(
                "display pixels are not square "
                f"({self.mm_per_px_x:.5f} vs {self.mm_per_px_y:.5f} mm/px); "
                "angular conversions use the horizontal axis",
                stacklevel=3,
            )

    @property
    def mm_per_px_x(self) -> float:
        return self.width_mm / self.width_px

    @property
    def mm_per_px_y(self) -> float:
        return self.height_mm / self.height_px

    @property
    def is_anisotropic(self) -> bool:
        mx, my = self.mm_per_px_x, self.mm_per_px_y
        return abs(mx - my) > ANISOTROPY_TOLERANCE * max(mx, my)


def _require(geometry: Optional[DisplayGeometry]) -> DisplayGeometry:
    if geometry is None:
        raise UnitUnavailableError("display geometry is required for angular units")
    if not isinstance(geometry, DisplayGeometry):
        raise TypeError(f"expected DisplayGeometry, got {type(geometry).__name__}")
    return geometry


def pixels_to_degrees(dx_px, dy_px, geometry: Optional[DisplayGeometry]):
    """Visual angle subtended by an on-screen displacement.

    The displacement length is converted to millimetres with the horizontal
    pixel pitch and mapped through ``atan(chord / viewing_distance)``.
    Accepts scalars or numpy arrays.
    """
    g = _require(geometry)
    chord_mm = np.hypot(dx_px, dy_px) * g.mm_per_px_x
    deg = np.degrees(np.arctan(chord_mm / g.viewing_distance_mm))
    return float(deg) if np.ndim(deg) == 0 else deg


def visual_angle_to_pixels(theta_deg, geometry: Optional[DisplayGeometry]):
    """On-screen extent, in horizontal pixels, of a visual angle."""
    g = _require(geometry)
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~(theta > 0)) or np.any(theta >= 90):
        raise ValueError(f"visual angle must lie in (0, 90) degrees, got {theta_deg!r}")
    px = np.tan(np.radians(theta)) * g.viewing_distance_mm / g.mm_per_px_x
    return float(px) if np.ndim(px) == 0 else px


@dataclass(frozen=True)
class GazeSample:
    timestamp: int  # microseconds since recording start
    gaze_x: Optional[float] = None
    gaze_y: Optional[float] = None
    pupil_left: Optional[float] = None  # mm
    pupil_right: Optional[float] = None  # mm
    validity_left: bool = False
    validity_right: bool = False
    gaze_z: Optional[float] = None  # parsed and carried, never used

    def is_valid(self, policy: EyePolicy = EyePolicy.AVERAGE) -> bool:
        if self.gaze_x is None or self.gaze_y is None:
            return False
        return bool(_combine_validity(self.validity_left, self.validity_right, EyePolicy(policy)))


def _combine_validity(vl, vr, policy: EyePolicy):
    if policy is EyePolicy.LEFT:
        return vl
    if policy is EyePolicy.RIGHT:
        return vr
    if policy is EyePolicy.STRICT_BOTH:
        return np.logical_and(vl, vr)
    return np.logical_or(vl, vr)


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _opt(v: float) -> Optional[float]:
    return None if math.isnan(v) else float(v)


@dataclass(frozen=True, eq=False)
class Recording:
    """Columnar, read-only store of one recording's samples.

    Absent numeric values are NaN. ``samples`` materialises
    :class:`GazeSample` objects on demand; the array attributes are the
    primary representation used by the processing modules.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pupil_left: np.ndarray
    pupil_right: np.ndarray
    valid_left: np.ndarray
    valid_right: np.ndarray
    sampling_rate_hz: float
    geometry: Optional[DisplayGeometry] = None
    annotations: tuple = ()
    z: Optional[np.ndarray] = None
    dropped_rows: int = 0

    def __post_init__(self):
        n = len(self.t)
        cols = {
            "t": np.asarray(self.t, dtype=np.int64),
            "x": np.asarray(self.x, dtype=float),
            "y": np.asarray(self.y, dtype=float),
            "pupil_left": np.asarray(self.pupil_left, dtype=float),
            "pupil_right": np.asarray(self.pupil_right, dtype=float),
            "valid_left": np.asarray(self.valid_left, dtype=bool),
            "valid_right": np.asarray(self.valid_right, dtype=bool),
        }
        if self.z is not None:
            cols["z"] = np.asarray(self.z, dtype=float)
        for name, arr in cols.items():
            if arr.shape != (n,):
                raise ValueError(f"column {name!r} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, _ro(arr))
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must strictly increase")
        if not (self.sampling_rate_hz > 0):
            raise ValueError(f"sampling_rate_hz must be positive, got {self.sampling_rate_hz!r}")
        if n > 2:
            median_dt = float(np.median(np.diff(self.t)))
            declared = 1e6 / self.sampling_rate_hz
            if abs(median_dt - declared) > RATE_TOLERANCE * declared:
                raise ValueError(
                    f"declared rate {self.sampling_rate_hz} Hz disagrees with median "
                    f"sample interval {median_dt:.1f} us"
                )
        anns = tuple((int(ts), str(label)) for ts, label in self.annotations)
        object.__setattr__(self, "annotations", tuple(sorted(anns, key=lambda a: a[0])))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def period_us(self) -> float:
        return 1e6 / self.sampling_rate_hz

    def valid(self, policy: EyePolicy = EyePolicy.AVERAGE) -> np.ndarray:
        has_gaze = ~(np.isnan(self.x) | np.isnan(self.y))
        return has_gaze & _combine_validity(self.valid_left, self.valid_right, EyePolicy(policy))

    def pupil(self, policy: EyePolicy = EyePolicy.AVERAGE) -> np.ndarray:
        """Per-sample pupil diameter after applying the eye policy (NaN when absent)."""
        policy = EyePolicy(policy)
        pl = np.where(self.valid_left, self.pupil_left, np.nan)
        pr = np.where(self.valid_right, self.pupil_right, np.nan)
        if policy is EyePolicy.LEFT:
            return pl
        if policy is EyePolicy.RIGHT:
            return pr
        if policy is EyePolicy.STRICT_BOTH:
            return (pl + pr) / 2.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(np.vstack([pl, pr]), axis=0) if len(pl) else pl

    @property
    def samples(self) -> tuple:
        z = self.z if self.z is not None else np.full(len(self.t), np.nan)
        return tuple(
            GazeSample(
                int(self.t[i]), _opt(self.x[i]), _opt(self.y[i]),
                _opt(self.pupil_left[i]), _opt(self.pupil_right[i]),
                bool(self.valid_left[i]), bool(self.valid_right[i]), _opt(z[i]),
            )
            for i in range(len(self.t))
        )

    @classmethod
    def from_samples(cls, samples: Iterable[GazeSample], sampling_rate_hz: float, **kwargs) -> "Recording":
        samples = list(samples)

        def col(attr):
            return np.array([np.nan if getattr(s, attr) is None else getattr(s, attr) for s in samples], dtype=float)

        z = col("gaze_z")
        return cls(
            t=np.array([s.timestamp for s in samples], dtype=np.int64),
            x=col("gaze_x"), y=col("gaze_y"),
            pupil_left=col("pupil_left"), pupil_right=col("pupil_right"),
            valid_left=np.array([s.validity_left for s in samples], dtype=bool),
            valid_right=np.array([s.validity_right for s in samples], dtype=bool),
            sampling_rate_hz=sampling_rate_hz,
            z=None if np.all(np.isnan(z)) else z,
            **kwargs,
        )

    def take(self, index, **overrides) -> "Recording":
        """Sub-recording holding the samples selected by ``index`` (slice or mask)."""
        kw = dict(
            t=self.t[index], x=self.x[index], y=self.y[index],
            pupil_left=self.pupil_left[index], pupil_right=self.pupil_right[index],
            valid_left=self.valid_left[index], valid_right=self.valid_right[index],
            sampling_rate_hz=self.sampling_rate_hz, geometry=self.geometry,
            annotations=self.annotations,
            z=None if self.z is None else self.z[index],
        )
        kw.update(overrides)
        return Recording(**kw)

    def replace(self, **overrides) -> "Recording":
        return self.take(slice(None), dropped_rows=self.dropped_rows, **overrides)


@dataclass(frozen=True)
class Fixation:
    centroid_x: float
    centroid_y: float
    onset: int  # us
    duration: int  # us
    mean_pupil: Optional[float] = None
    off_stimulus: bool = False


@dataclass(frozen=True)
class Saccade:
    start_x: float
    start_y: float
    end_x: float
    end_y: float
    onset: int
    duration: int
    amplitude: float  # degrees, or px without geometry
    peak_velocity: float  # deg/s, or px/s without geometry


@dataclass(frozen=True)
class Blink:
    onset: int
    duration: int


@dataclass(frozen=True)
class Scanpath:
    fixations: tuple
    stimulus_id: str = ""

    def __post_init__(self):
        fx = tuple(self.fixations)
        object.__setattr__(self, "fixations", fx)
        for a, b in zip(fx, fx[1:]):
            if b.onset <= a.onset:
                raise ValueError("fixation onsets must strictly increase within a scanpath")

    def __len__(self) -> int:
        return len(self.fixations)

    def points(self, duration_scale: Optional[float] = None) -> np.ndarray:
        """Fixations as (x, y) rows, or (x, y, scale * duration_ms) when a scale is given."""
        rows = [(f.centroid_x, f.centroid_y) for f in self.fixations]
        pts = np.array(rows, dtype=float).reshape(-1, 2)
        if duration_scale is not None:
            d = np.array([f.duration / 1000.0 for f in self.fixations], dtype=float)
            pts = np.column_stack([pts, duration_scale * d])
        return pts


def sample_duration(t: Sequence[int], first: int, last: int, period_us: float) -> int:
    """Duration covered by samples ``first..last`` inclusive; each sample spans one period."""
    return int(t[last] - t[first] + round(period_us))
