"""Signal conditioning: smoothing, gap filling, blink removal, baseline correction."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ingest import invalid_runs
from .model import Blink, EyePolicy, Recording

DEFAULT_MAX_INTERP_GAP_MS = 75.0
DEFAULT_BLINK_PAD_MS = 50.0
DEFAULT_NEIGHBOR_MS = 100.0
DEFAULT_LOWPASS_MS = 200.0
MAX_BASELINE_US = 1_000_000


class SmoothMethod(str, enum.Enum):
    NONE = "none"
    MOVING_AVERAGE = "moving_average"
    MEDIAN = "median"


class InterpMethod(str, enum.Enum):
    NONE = "none"
    LINEAR = "linear"
    NEAREST = "nearest_neighbor"
    WEIGHTED = "weighted_average"


class BlinkStrategy(str, enum.Enum):
    INTERPOLATE = "interpolate"
    AVERAGE_NEIGHBORS = "average_neighbors"
    LOW_PASS = "low_pass"


@dataclass(frozen=True)
class Series:
    """Timestamped scalar signal; NaN marks absent values.

    ``synthetic`` flags values that were produced by interpolation or blink
    replacement rather than measured.
    """

    t: np.ndarray
    values: np.ndarray
    synthetic: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t and values must be equal-length 1-D arrays")
        syn = np.zeros(len(t), dtype=bool) if self.synthetic is None else np.asarray(self.synthetic, dtype=bool)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "synthetic", syn)

    def __len__(self):
        return len(self.t)

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def with_values(self, values, synthetic=None) -> "Series":
        return Series(self.t, values, self.synthetic if synthetic is None else synthetic)


def _check_window(window: int, n: int) -> None:
    if not isinstance(window, (int, np.integer)) or window < 3 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 3, got {window!r}")
    if window > n:
        raise ValueError(f"window {window} exceeds series length {n}")


def smooth(series: Series, method="moving_average", window: int = 5) -> Series:
    """Centered moving-average or median filter.

    Near the ends the window shrinks symmetrically so it stays centered.
    Absent samples stay absent; present samples aggregate over the present
    values of their window.
    """
    method = SmoothMethod(method)
    v = series.values
    if method is SmoothMethod.NONE:
        return series
    _check_window(window, len(v))
    reduce = np.nanmean if method is SmoothMethod.MOVING_AVERAGE else np.nanmedian
    n, half = len(v), window // 2
    out = np.full(n, np.nan)
    present = ~np.isnan(v)
    if n > 2 * half:
        view = np.lib.stride_tricks.sliding_window_view(v, window)
        core = np.arange(half, n - half)
        keep = present[core]
        out[core[keep]] = reduce(view[keep], axis=1)
    for i in list(range(min(half, n))) + list(range(max(n - half, half), n)):
        if present[i]:
            h = min(half, i, n - 1 - i)
            out[i] = reduce(v[i - h:i + h + 1])
    return series.with_values(out)


def _gap_runs(valid: np.ndarray):
    """Interior runs of absent samples bounded by present ones on both sides."""
    for first, last in invalid_runs(valid):
        if first > 0 and last < len(valid) - 1:
            yield first, last


def _fill(t, v, first, last, method, kernel, valid):
    lo, hi = first - 1, last + 1
    tt = t[first:last + 1].astype(float)
    if method is InterpMethod.LINEAR:
        frac = (tt - t[lo]) / float(t[hi] - t[lo])
        return v[lo] + (v[hi] - v[lo]) * frac
    if method is InterpMethod.NEAREST:
        # ties go to the earlier sample
        return np.where(tt - t[lo] <= t[hi] - tt, v[lo], v[hi])
    idx = np.flatnonzero(valid)
    left = idx[idx <= lo][-kernel:]
    right = idx[idx >= hi][:kernel]
    anchors = np.concatenate([left, right])
    dt = np.abs(tt[:, None] - t[anchors][None, :].astype(float))
    w = 1.0 / dt
    return (w * v[anchors][None, :]).sum(axis=1) / w.sum(axis=1)


def interpolate_gaps(series: Series, method="linear", max_gap_ms: float = DEFAULT_MAX_INTERP_GAP_MS,
                     kernel: int = 2) -> Series:
    """Fill interior gaps whose bounding valid samples are less than ``max_gap_ms`` apart.

    Leading and trailing gaps are never extrapolated. ``kernel`` is the
    number of valid samples used on each side by the weighted-average
    method (inverse-distance weights in time).
    """
    method = InterpMethod(method)
    valid = series.valid
    if np.count_nonzero(valid) < 2:
        raise ValueError("interpolation needs at least two valid samples")
    if not max_gap_ms > 0:
        raise ValueError(f"max_gap_ms must be positive, got {max_gap_ms!r}")
    if method is InterpMethod.NONE:
        return series
    t, v = series.t, series.values
    out = v.copy()
    syn = series.synthetic.copy()
    limit = max_gap_ms * 1000.0
    for first, last in _gap_runs(valid):
        if t[last + 1] - t[first - 1] >= limit:
            continue
        out[first:last + 1] = _fill(t, v, first, last, method, kernel, valid)
        syn[first:last + 1] = True
    return Series(t, out, syn)


def _blink_windows(blinks: Sequence[Blink], pad_us: float):
    spans = sorted((b.onset - pad_us, b.onset + b.duration + pad_us) for b in blinks)
    merged = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return merged


def remove_blinks_from_pupil(pupil: Series, blinks: Sequence[Blink], pad_ms: float = DEFAULT_BLINK_PAD_MS,
                             strategy="interpolate", neighbor_ms: float = DEFAULT_NEIGHBOR_MS,
                             lowpass_ms: float = DEFAULT_LOWPASS_MS) -> Series:
    """Replace pupil samples inside each padded blink window ``[onset - pad, end + pad)``.

    ``interpolate`` draws a line between the nearest valid samples outside
    the window. ``average_neighbors`` fills with the mean of the mean of the
    valid samples in the ``neighbor_ms`` before and the mean of those after
    the window (one side alone if the other is empty). ``low_pass`` blanks
    the windows and then applies a centered moving average of about
    ``lowpass_ms`` to the whole trace. Overlapping windows are merged.
    """
    strategy = BlinkStrategy(strategy)
    if not blinks:
        return pupil
    t, v = pupil.t, pupil.values
    out = v.copy()
    syn = pupil.synthetic.copy()
    windows = _blink_windows(blinks, pad_ms * 1000.0)
    masks = [(t >= lo) & (t < hi) for lo, hi in windows]
    blanked = v.copy()
    for m in masks:
        blanked[m] = np.nan

    if strategy is BlinkStrategy.LOW_PASS:
        dt = float(np.median(np.diff(t))) if len(t) > 1 else 1.0
        w = max(3, int(round(lowpass_ms * 1000.0 / dt)))
        w = min(w + (w % 2 == 0), len(t) if len(t) % 2 else len(t) - 1)
        if w < 3:
            raise ValueError("series too short for low-pass blink removal")
        half = w // 2
        out = np.full(len(t), np.nan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for i in range(len(t)):
                out[i] = np.nanmean(blanked[max(0, i - half):i + half + 1])
        for m in masks:
            syn[m] = True
        return Series(t, out, syn)

    present = ~np.isnan(blanked)
    idx = np.flatnonzero(present)
    for (lo, hi), m in zip(windows, masks):
        if not m.any():
            continue
        if strategy is BlinkStrategy.INTERPOLATE:
            before = idx[t[idx] < lo]
            after = idx[t[idx] >= hi]
            if len(before) == 0 or len(after) == 0:
                out[m] = np.nan
                continue
            a, b = before[-1], after[0]
            frac = (t[m] - t[a]).astype(float) / float(t[b] - t[a])
            out[m] = blanked[a] + (blanked[b] - blanked[a]) * frac
        else:
            pre = blanked[present & (t >= lo - neighbor_ms * 1000.0) & (t < lo)]
            post = blanked[present & (t >= hi) & (t < hi + neighbor_ms * 1000.0)]
            means = [s.mean() for s in (pre, post) if len(s)]
            out[m] = sum(means) / len(means) if means else np.nan
        syn[m] = True
    return Series(t, out, syn)


def baseline_correct(pupil: Series, baseline_window, mode="subtractive", statistic="median") -> Series:
    """Subtractive or divisive correction against a baseline window.

    ``baseline_window`` is a half-open ``(start_us, end_us)`` interval no
    longer than one second.
    """
    start, end = baseline_window
    if end <= start:
        raise ValueError("baseline window must have positive length")
    if end - start > MAX_BASELINE_US:
        raise ValueError("baseline window must not exceed 1 s")
    v = pupil.values
    sel = (pupil.t >= start) & (pupil.t < end) & ~np.isnan(v)
    if not sel.any():
        raise ValueError("baseline window contains no valid samples")
    if statistic == "median":
        base = float(np.median(v[sel]))
    elif statistic == "mean":
        base = float(np.mean(v[sel]))
    else:
        raise ValueError(f"unknown baseline statistic {statistic!r}")
    if mode == "subtractive":
        return pupil.with_values(v - base)
    if mode == "divisive":
        if base == 0:
            raise ValueError("divisive correction with a zero baseline")
        if base < 0:
            raise ValueError("divisive correction requires a positive baseline")
        return pupil.with_values(v / base)
    raise ValueError(f"unknown baseline mode {mode!r}")


@dataclass(frozen=True)
class CleanConfig:
    smoothing: SmoothMethod = SmoothMethod.NONE
    smoothing_window: int = 5
    interpolation: InterpMethod = InterpMethod.LINEAR
    interp_kernel: int = 2
    max_interp_gap_ms: float = DEFAULT_MAX_INTERP_GAP_MS
    order: str = "interpolate_first"

    def __post_init__(self):
        object.__setattr__(self, "smoothing", SmoothMethod(self.smoothing))
        object.__setattr__(self, "interpolation", InterpMethod(self.interpolation))
        if self.smoothing is not SmoothMethod.NONE:
            w = self.smoothing_window
            if w < 3 or w % 2 == 0:
                raise ValueError(f"smoothing_window must be odd and >= 3, got {w}")
        if not self.max_interp_gap_ms > 0:
            raise ValueError("max_interp_gap_ms must be positive")
        if self.order not in ("interpolate_first", "smooth_first"):
            raise ValueError(f"order must be interpolate_first or smooth_first, got {self.order!r}")


def _clean_series(s: Series, cfg: CleanConfig) -> Series:
    def interp(x):
        if cfg.interpolation is InterpMethod.NONE or np.count_nonzero(x.valid) < 2:
            return x
        return interpolate_gaps(x, cfg.interpolation, cfg.max_interp_gap_ms, cfg.interp_kernel)

    def sm(x):
        if cfg.smoothing is SmoothMethod.NONE or len(x) < cfg.smoothing_window:
            return x
        return smooth(x, cfg.smoothing, cfg.smoothing_window)

    return sm(interp(s)) if cfg.order == "interpolate_first" else interp(sm(s))


def clean_recording(rec: Recording, cfg: CleanConfig, policy=EyePolicy.AVERAGE) -> Recording:
    """Apply gap filling and smoothing to gaze and pupil channels.

    Samples whose gaze was filled become valid for both eyes.
    """
    valid = rec.valid(policy)
    x = np.where(valid, rec.x, np.nan)
    y = np.where(valid, rec.y, np.nan)
    sx = _clean_series(Series(rec.t, x), cfg)
    sy = _clean_series(Series(rec.t, y), cfg)
    pl = _clean_series(Series(rec.t, np.where(rec.valid_left, rec.pupil_left, np.nan)), cfg)
    pr = _clean_series(Series(rec.t, np.where(rec.valid_right, rec.pupil_right, np.nan)), cfg)
    filled = sx.synthetic & sy.synthetic & ~valid
    return rec.replace(
        x=sx.values, y=sy.values,
        pupil_left=pl.values, pupil_right=pr.values,
        valid_left=(rec.valid_left & valid) | filled,
        valid_right=(rec.valid_right & valid) | filled,
    )
