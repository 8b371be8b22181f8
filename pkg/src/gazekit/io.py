"""File formats shared across stages: event tables, token files, atomic writes."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Optional

from .model import Blink, Fixation, Saccade, Scanpath

EVENT_FIELDS = ("class", "onset_us", "duration_us", "x", "y", "amplitude_deg", "peak_vel_deg_s")


def _read_umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


# read once: os.umask is process-wide and racy under the worker pool
_UMASK = _read_umask()


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        # mkstemp creates 0600; give the result ordinary permissions
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _num(v: Optional[float]) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def format_events(fixations=(), saccades=(), blinks=()) -> str:
    """One row per event, ordered by onset then class.

    Saccade rows carry the landing point in ``x``/``y``. Amplitude and
    velocity columns hold pixel units when no display geometry was known.
    """
    rows = []
    for f in fixations:
        rows.append((f.onset, 0, ["fixation", str(f.onset), str(f.duration), _num(f.centroid_x), _num(f.centroid_y), "", ""]))
    for s in saccades:
        rows.append((s.onset, 1, ["saccade", str(s.onset), str(s.duration), _num(s.end_x), _num(s.end_y),
                                  _num(s.amplitude), _num(s.peak_velocity)]))
    for b in blinks:
        rows.append((b.onset, 2, ["blink", str(b.onset), str(b.duration), "", "", "", ""]))
    rows.sort(key=lambda r: (r[0], r[1]))
    out = io.StringIO()
    out.write(",".join(EVENT_FIELDS) + "\n")
    for _, _, cells in rows:
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def read_events(path):
    """Parse an event table back into (fixations, saccades, blinks)."""
    fixations, saccades, blinks = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EVENT_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: event table lacks columns {sorted(missing)}")
        for row in reader:
            onset, dur = int(row["onset_us"]), int(row["duration_us"])
            kind = row["class"]
            if kind == "fixation":
                fixations.append(Fixation(float(row["x"]), float(row["y"]), onset, dur))
            elif kind == "saccade":
                x, y = float(row["x"]), float(row["y"])
                saccades.append(Saccade(math.nan, math.nan, x, y, onset, dur,
                                        float(row["amplitude_deg"]), float(row["peak_vel_deg_s"])))
            elif kind == "blink":
                blinks.append(Blink(onset, dur))
            else:
                raise ValueError(f"{path}: unknown event class {kind!r}")
    return fixations, saccades, blinks


def read_scanpath(path) -> Scanpath:
    fixations, _, _ = read_events(path)
    return Scanpath(tuple(fixations), stimulus_id=Path(path).stem)


def format_tokens(tokens, bin_ms=None) -> str:
    head = f"# bin_ms: {bin_ms!r}\n" if bin_ms is not None else ""
    return head + " ".join(tokens) + "\n"


def read_tokens(path):
    """Read a token file written by :func:`format_tokens`; returns (tokens, bin_ms)."""
    bin_ms = None
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                if key.strip() == "bin_ms":
                    bin_ms = float(value)
                continue
            tokens.extend(line.split())
    return tuple(tokens), bin_ms
