"""Raw gaze-log parsing, quality metrics and exclusion rules.

Column mapping files are INI documents::

    [columns]
    timestamp = Recording timestamp
    gaze_x = Gaze point X
    gaze_y = Gaze point Y
    pupil_left = Pupil diameter left
    pupil_right = Pupil diameter right
    validity_left = Validity left
    validity_right = Validity right
    annotation = Event

    [format]
    delimiter = tab
    timestamp_unit = auto
    valid_values = 1, valid, true
    sampling_rate_hz = 60

    [geometry]
    width_mm = 530
    height_mm = 298.125
    width_px = 1920
    height_px = 1080
    viewing_distance_mm = 600

Only ``timestamp``, ``gaze_x`` and ``gaze_y`` are required.
"""
from __future__ import annotations

import configparser
import csv
import enum
import io
import math
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import DisplayGeometry, EyePolicy, Recording

NORMALIZED_FIELDS = ("timestamp_us", "x", "y", "pupil_l", "pupil_r", "valid_l", "valid_r")
DEFAULT_MIN_TRACKING_RATIO = 0.75
# gap-histogram bucket edges in ms; the last bucket is open-ended
GAP_BUCKETS_MS = (0, 25, 75, 150, 300, 500, 1000)

_DELIMITERS = {"comma": ",", "tab": "\t", "semicolon": ";", ",": ",", "\t": "\t", ";": ";", "\\t": "\t"}
_UNIT_SCALE = {"s": 1_000_000, "ms": 1_000, "us": 1}


class SchemaError(ValueError):
    pass


class EmptyRecordingError(ValueError):
    pass


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnMapping:
    timestamp: str = "timestamp"
    gaze_x: str = "x"
    gaze_y: str = "y"
    gaze_z: Optional[str] = None
    pupil_left: Optional[str] = None
    pupil_right: Optional[str] = None
    validity_left: Optional[str] = None
    validity_right: Optional[str] = None
    annotation: Optional[str] = None
    delimiter: str = ","
    timestamp_unit: str = "auto"
    valid_values: tuple = ("1", "true", "valid", "yes")
    sampling_rate_hz: Optional[float] = None
    geometry: Optional[DisplayGeometry] = None

    def __post_init__(self):
        if self.timestamp_unit not in ("auto", *_UNIT_SCALE):
            raise ValueError(f"timestamp_unit must be auto, s, ms or us; got {self.timestamp_unit!r}")
        object.__setattr__(self, "delimiter", _DELIMITERS.get(self.delimiter, self.delimiter))
        object.__setattr__(self, "valid_values", tuple(v.strip().lower() for v in self.valid_values))

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser) -> "ColumnMapping":
        kw = {}
        if parser.has_section("columns"):
            for key, value in parser.items("columns"):
                if key not in _COLUMN_KEYS:
                    raise SchemaError(f"unknown column-mapping key {key!r}")
                kw[key] = value.strip() or None
        if parser.has_section("format"):
            fmt = parser["format"]
            if "delimiter" in fmt:
                kw["delimiter"] = fmt["delimiter"].strip() or ","
            if "timestamp_unit" in fmt:
                kw["timestamp_unit"] = fmt["timestamp_unit"].strip()
            if "valid_values" in fmt:
                kw["valid_values"] = tuple(v for v in fmt["valid_values"].split(",") if v.strip())
            if fmt.get("sampling_rate_hz", "").strip():
                kw["sampling_rate_hz"] = float(fmt["sampling_rate_hz"])
        geometry = geometry_from_config(parser)
        if geometry is not None:
            kw["geometry"] = geometry
        return cls(**kw)

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "ColumnMapping":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str.lower
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        return cls.from_config(parser)


_COLUMN_KEYS = (
    "timestamp", "gaze_x", "gaze_y", "gaze_z", "pupil_left", "pupil_right",
    "validity_left", "validity_right", "annotation",
)

NORMALIZED_MAPPING = ColumnMapping(
    timestamp="timestamp_us", gaze_x="x", gaze_y="y", pupil_left="pupil_l", pupil_right="pupil_r",
    validity_left="valid_l", validity_right="valid_r", timestamp_unit="us",
)

TOBII_MAPPING = ColumnMapping(
    timestamp="Recording timestamp", gaze_x="Gaze point X", gaze_y="Gaze point Y",
    pupil_left="Pupil diameter left", pupil_right="Pupil diameter right",
    validity_left="Validity left", validity_right="Validity right",
    annotation="Event", delimiter="\t", timestamp_unit="auto",
    valid_values=("valid", "1"),
)


def geometry_from_config(parser: configparser.ConfigParser) -> Optional[DisplayGeometry]:
    if not parser.has_section("geometry"):
        return None
    sec = parser["geometry"]
    try:
        return DisplayGeometry(
            width_mm=float(sec["width_mm"]), height_mm=float(sec["height_mm"]),
            width_px=int(sec["width_px"]), height_px=int(sec["height_px"]),
            viewing_distance_mm=float(sec["viewing_distance_mm"]),
        )
    except KeyError as exc:
        raise SchemaError(f"[geometry] is missing key {exc.args[0]!r}") from None


def _number(cell: str) -> float:
    cell = cell.strip()
    if not cell:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        return math.nan


def detect_timestamp_unit(raw: np.ndarray) -> str:
    """Guess seconds / milliseconds / microseconds from the median sample interval.

    Trackers sample between roughly 30 Hz and 2 kHz, so the interval is
    0.5 ms to 35 ms: below 0.1 in raw units means seconds, below 100 means
    milliseconds, anything larger microseconds.
    """
    d = np.diff(raw)
    d = d[d > 0]
    if len(d) == 0:
        return "us"
    med = float(np.median(d))
    if med < 0.1:
        return "s"
    if med < 100:
        return "ms"
    return "us"


def parse_recording(source, mapping: ColumnMapping = NORMALIZED_MAPPING, policy=EyePolicy.AVERAGE) -> Recording:
    """Parse a delimiter-separated gaze log into a :class:`Recording`.

    ``source`` may be a path, a binary stream or a text stream. Lines
    starting with ``#`` before the header carry metadata written by
    :func:`write_normalized`. Rows whose timestamp does not exceed the last
    retained one are dropped and counted in ``Recording.dropped_rows``.
    """
    text = _read_text(source)
    meta_lines = []
    body = io.StringIO(text)
    pos = 0
    while True:
        line = body.readline()
        if not line or not line.startswith("#"):
            break
        meta_lines.append(line[1:].strip())
        pos = body.tell()
    body.seek(pos)
    meta = _parse_meta(meta_lines)

    reader = csv.reader(body, delimiter=mapping.delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyRecordingError("input has no header row") from None
    index = {name: i for i, name in enumerate(header)}

    def col(key, required=False):
        name = getattr(mapping, key)
        if name is None:
            if required:
                raise SchemaError(f"column mapping does not name the {key} column")
            return None
        if name not in index:
            raise SchemaError(f"mapped column {name!r} ({key}) not found in header")
        return index[name]

    i_t = col("timestamp", True)
    i_x, i_y = col("gaze_x", True), col("gaze_y", True)
    i_z = col("gaze_z")
    i_pl, i_pr = col("pupil_left"), col("pupil_right")
    i_vl, i_vr = col("validity_left"), col("validity_right")
    i_ann = col("annotation")
    ok = set(mapping.valid_values)

    ts, xs, ys, zs, pls, prs, vls, vrs = [], [], [], [], [], [], [], []
    anns = []
    dropped = 0
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        t = _number(row[i_t])
        if math.isnan(t):
            dropped += 1
            continue
        if ts and t <= ts[-1]:
            dropped += 1
            continue
        x, y = _number(row[i_x]), _number(row[i_y])
        has_gaze = not (math.isnan(x) or math.isnan(y))
        if i_vl is None and i_vr is None:
            vl = vr = has_gaze
        else:
            vl = has_gaze and (row[i_vl].strip().lower() in ok if i_vl is not None else False)
            vr = has_gaze and (row[i_vr].strip().lower() in ok if i_vr is not None else False)
            if i_vl is None:
                vl = vr
            if i_vr is None:
                vr = vl
        ts.append(t)
        xs.append(x)
        ys.append(y)
        zs.append(_number(row[i_z]) if i_z is not None else math.nan)
        pls.append(_number(row[i_pl]) if i_pl is not None else math.nan)
        prs.append(_number(row[i_pr]) if i_pr is not None else math.nan)
        vls.append(vl)
        vrs.append(vr)
        if i_ann is not None and row[i_ann].strip():
            anns.append((t, row[i_ann].strip()))

    if not ts:
        raise EmptyRecordingError("no parseable rows")
    raw_t = np.array(ts, dtype=float)
    unit = mapping.timestamp_unit
    if unit == "auto":
        unit = detect_timestamp_unit(raw_t)
    scale = _UNIT_SCALE[unit]
    origin = meta.get("origin", raw_t[0])
    t_us = np.rint((raw_t - origin) * scale).astype(np.int64)
    keep = np.concatenate([[True], np.diff(t_us) > 0])
    dropped += int(np.count_nonzero(~keep))

    rate = meta.get("sampling_rate_hz") or mapping.sampling_rate_hz
    if rate is None:
        if keep.sum() < 2:
            raise EmptyRecordingError("cannot infer sampling rate from fewer than two samples")
        rate = 1e6 / float(np.median(np.diff(t_us[keep])))

    z = np.array(zs)[keep]
    annotations = tuple((int(round((a_t - origin) * scale)), label) for a_t, label in anns)
    annotations = annotations + tuple(meta.get("annotations", ()))
    return Recording(
        t=t_us[keep], x=np.array(xs)[keep], y=np.array(ys)[keep],
        pupil_left=np.array(pls)[keep], pupil_right=np.array(prs)[keep],
        valid_left=np.array(vls, dtype=bool)[keep], valid_right=np.array(vrs, dtype=bool)[keep],
        sampling_rate_hz=float(rate),
        geometry=meta.get("geometry") or mapping.geometry,
        annotations=annotations,
        z=None if np.all(np.isnan(z)) else z,
        dropped_rows=dropped,
    )


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def _parse_meta(lines):
    meta = {}
    anns = []
    for line in lines:
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "sampling_rate_hz":
            meta[key] = float(value)
        elif key == "geometry":
            w_mm, h_mm, w_px, h_px, dist = value.split()
            meta[key] = DisplayGeometry(float(w_mm), float(h_mm), int(w_px), int(h_px), float(dist))
        elif key == "annotation":
            ts, _, label = value.partition(" ")
            anns.append((int(ts), label))
    if anns:
        meta["annotations"] = anns
    if meta:
        # normalized files already carry times relative to the recording start
        meta["origin"] = 0.0
    return meta


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def format_normalized(rec: Recording) -> str:
    """Render a recording in the normalized columnar text format."""
    out = io.StringIO()
    out.write(f"# sampling_rate_hz: {rec.sampling_rate_hz!r}\n")
    g = rec.geometry
    if g is not None:
        out.write(
            f"# geometry: {g.width_mm!r} {g.height_mm!r} {g.width_px} {g.height_px} {g.viewing_distance_mm!r}\n"
        )
    for ts, label in rec.annotations:
        out.write(f"# annotation: {ts} {label}\n")
    out.write(",".join(NORMALIZED_FIELDS) + "\n")
    for i in range(len(rec)):
        out.write(
            f"{int(rec.t[i])},{_fmt(rec.x[i])},{_fmt(rec.y[i])},{_fmt(rec.pupil_left[i])},"
            f"{_fmt(rec.pupil_right[i])},{int(rec.valid_left[i])},{int(rec.valid_right[i])}\n"
        )
    return out.getvalue()


def write_normalized(rec: Recording, path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, format_normalized(rec))


def read_normalized(source) -> Recording:
    return parse_recording(source, NORMALIZED_MAPPING)


def tracking_ratio(rec: Recording, policy=EyePolicy.AVERAGE) -> float:
    """Fraction of rows that are valid under the eye policy; every row counts."""
    if len(rec) == 0:
        raise EmptyRecordingError("tracking ratio of an empty recording is undefined")
    return int(np.count_nonzero(rec.valid(policy))) / len(rec)


class ExclusionReason(str, enum.Enum):
    NONE = "none"
    LOW_TRACKING_RATIO = "low_tracking_ratio"
    MARKED_BAD_CALIBRATION = "marked_bad_calibration"
    MARKED_INVALID_TRIAL = "marked_invalid_trial"


@dataclass(frozen=True)
class ExclusionFlags:
    """Manual marks set by the experimenter."""

    bad_calibration: bool = False
    invalid_trial: bool = False


@dataclass(frozen=True)
class IngestReport:
    tracking_ratio: float
    sample_count: int
    gap_histogram: tuple
    excluded: bool
    exclusion_reason: ExclusionReason
    dropped_rows: int = 0

    def __post_init__(self):
        if self.excluded != (self.exclusion_reason is not ExclusionReason.NONE):
            raise ValueError("excluded must be set exactly when a reason is given")

    def to_dict(self) -> dict:
        return {
            "tracking_ratio": self.tracking_ratio,
            "sample_count": self.sample_count,
            "dropped_rows": self.dropped_rows,
            "gap_histogram": [[label, count] for label, count in self.gap_histogram],
            "excluded": self.excluded,
            "exclusion_reason": self.exclusion_reason.value,
        }


def exclusion_decision(ratio: float, flags: ExclusionFlags, min_tracking_ratio: float) -> ExclusionReason:
    """Priority: calibration mark, then invalid-trial mark, then tracking ratio."""
    if not 0.0 <= min_tracking_ratio <= 1.0:
        raise ValueError(f"min_tracking_ratio must lie in [0, 1], got {min_tracking_ratio!r}")
    if flags.bad_calibration:
        return ExclusionReason.MARKED_BAD_CALIBRATION
    if flags.invalid_trial:
        return ExclusionReason.MARKED_INVALID_TRIAL
    if ratio < min_tracking_ratio:
        return ExclusionReason.LOW_TRACKING_RATIO
    return ExclusionReason.NONE


def invalid_runs(valid: np.ndarray) -> list:
    """Maximal runs of False as inclusive (first, last) index pairs."""
    bad = ~np.asarray(valid, dtype=bool)
    if not bad.any():
        return []
    edges = np.diff(np.concatenate([[0], bad.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def gap_histogram(rec: Recording, policy=EyePolicy.AVERAGE) -> tuple:
    edges = GAP_BUCKETS_MS
    labels = [f"{lo}-{hi}ms" for lo, hi in zip(edges, edges[1:])] + [f">={edges[-1]}ms"]
    counts = [0] * len(labels)
    period = rec.period_us
    for first, last in invalid_runs(rec.valid(policy)):
        ms = (rec.t[last] - rec.t[first] + period) / 1000.0
        k = int(np.searchsorted(edges, ms, side="right")) - 1
        counts[max(k, 0)] += 1
    return tuple(zip(labels, counts))


def apply_exclusion_rules(
    rec: Recording,
    min_tracking_ratio: float = DEFAULT_MIN_TRACKING_RATIO,
    flags: ExclusionFlags = ExclusionFlags(),
    policy=EyePolicy.AVERAGE,
) -> IngestReport:
    ratio = tracking_ratio(rec, policy)
    reason = exclusion_decision(ratio, flags, min_tracking_ratio)
    return IngestReport(
        tracking_ratio=ratio,
        sample_count=len(rec),
        gap_histogram=gap_histogram(rec, policy),
        excluded=reason is not ExclusionReason.NONE,
        exclusion_reason=reason,
        dropped_rows=rec.dropped_rows,
    )


@dataclass(frozen=True)
class FixedIntervals:
    duration_ms: float


@dataclass(frozen=True)
class AtAnnotations:
    labels: Optional[frozenset] = None  # None matches every annotation


@dataclass(frozen=True)
class Hybrid:
    duration_ms: float
    labels: Optional[frozenset] = None


def _annotation_bounds(rec: Recording, labels) -> list:
    if not rec.annotations:
        raise SegmentationError("recording has no annotations")
    hits = [ts for ts, label in rec.annotations if labels is None or label in labels]
    if not hits:
        available = sorted({label for _, label in rec.annotations})
        raise SegmentationError(f"no annotations match {sorted(labels)}; available labels: {available}")
    return hits


def _interval_bounds(start: int, stop: int, duration_ms: float) -> list:
    if not duration_ms > 0:
        raise ValueError(f"segment duration must be positive, got {duration_ms!r}")
    step = duration_ms * 1000.0
    n = max(1, math.ceil((stop - start) / step))
    return [start + int(round(k * step)) for k in range(n)]


def segment(rec: Recording, scheme) -> list:
    """Split a recording into consecutive half-open time segments.

    A sample lying exactly on a boundary belongs to the following segment.
    Samples before the first boundary form a leading segment, so the
    segments always partition the recording. Empty segments are omitted.
    """
    if len(rec) == 0:
        return []
    t0, t_end = int(rec.t[0]), int(rec.t[-1]) + 1
    if isinstance(scheme, FixedIntervals):
        bounds = _interval_bounds(t0, t_end, scheme.duration_ms)
    elif isinstance(scheme, AtAnnotations):
        bounds = _annotation_bounds(rec, scheme.labels)
    elif isinstance(scheme, Hybrid):
        outer = sorted(set([t0] + _annotation_bounds(rec, scheme.labels)))
        bounds = []
        for lo, hi in zip(outer, outer[1:] + [max(t_end, outer[-1] + 1)]):
            bounds.extend(_interval_bounds(lo, hi, scheme.duration_ms))
    else:
        raise TypeError(f"unknown segmentation scheme {scheme!r}")
    bounds = sorted(set([t0] + [b for b in bounds if b > t0]))
    cuts = np.searchsorted(rec.t, bounds, side="left").tolist() + [len(rec)]
    segments = []
    for (lo, hi), b_lo, b_hi in zip(zip(cuts, cuts[1:]), bounds, bounds[1:] + [None]):
        if hi <= lo:
            continue
        anns = tuple(a for a in rec.annotations if a[0] >= b_lo and (b_hi is None or a[0] < b_hi))
        segments.append(rec.take(slice(lo, hi), annotations=anns))
    return segments
