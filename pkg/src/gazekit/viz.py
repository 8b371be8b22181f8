"""Saliency maps, raster output and SVG scanpath / gaze-plot emitters."""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .model import DisplayGeometry, Fixation, Scanpath, visual_angle_to_pixels

SVG_NS = "http://www.w3.org/2000/svg"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SaliencyConfig:
    sigma_px: Optional[float] = None
    visual_angle_deg: Optional[float] = None
    geometry: Optional[DisplayGeometry] = None
    weight_by_duration: bool = True
    normalization: str = "max_to_one"  # max_to_one | sum_to_one | none
    truncate_sigmas: Optional[float] = 4.0  # None evaluates the kernel everywhere

    def __post_init__(self):
        if self.normalization not in ("max_to_one", "sum_to_one", "none"):
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")
        if self.truncate_sigmas is not None and not self.truncate_sigmas > 0:
            raise ConfigurationError("truncate_sigmas must be positive")


def resolve_sigma(cfg: SaliencyConfig) -> float:
    """Kernel width in pixels: explicit, or the extent of a visual angle on the display."""
    if cfg.sigma_px is not None:
        if not cfg.sigma_px > 0:
            raise ConfigurationError("sigma_px must be positive")
        return float(cfg.sigma_px)
    if cfg.visual_angle_deg is None or cfg.geometry is None:
        raise ConfigurationError("saliency needs sigma_px, or visual_angle_deg together with display geometry")
    return float(visual_angle_to_pixels(cfg.visual_angle_deg, cfg.geometry))


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray  # (height, width)
    width: int
    height: int


def saliency_map(fixations: Sequence[Fixation], stimulus, cfg: SaliencyConfig = SaliencyConfig(sigma_px=75.0)) -> SaliencyMap:
    """Sum of isotropic Gaussians (peak value 1) centred on each fixation.

    Pixel ``(row, col)`` is evaluated at ``x = col, y = row``. Weights are
    fixation durations in seconds, or 1 when duration weighting is off. The
    kernel is cut off beyond ``truncate_sigmas`` standard deviations; at 4
    sigma the dropped tail is at most exp(-8), about 3.4e-4 of a kernel's
    peak.
    """
    width, height = int(stimulus[0]), int(stimulus[1])
    if width <= 0 or height <= 0:
        raise ValueError("stimulus dimensions must be positive")
    sigma = resolve_sigma(cfg)
    out = np.zeros((height, width), dtype=np.float64)
    if fixations:
        xs = np.array([f.centroid_x for f in fixations], dtype=float)
        ys = np.array([f.centroid_y for f in fixations], dtype=float)
        if cfg.weight_by_duration:
            ws = np.array([f.duration / 1e6 for f in fixations], dtype=float)
        else:
            ws = np.ones(len(fixations))
        radius = -1.0 if cfg.truncate_sigmas is None else cfg.truncate_sigmas * sigma
        kernels.gaussian_accumulate(out, xs, ys, ws, sigma, radius)
    if cfg.normalization == "max_to_one":
        peak = out.max()
        if peak > 0:
            out /= peak
    elif cfg.normalization == "sum_to_one":
        total = out.sum()
        if total > 0:
            out /= total
    return SaliencyMap(out, width, height)


def rescale_map(smap: SaliencyMap, width: int, height: int) -> SaliencyMap:
    """Bilinear resampling onto a ``width`` x ``height`` grid (pixel centres aligned)."""
    v = smap.values
    h0, w0 = v.shape

    def coords(n_out, n_in):
        c = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        c = np.clip(c, 0, n_in - 1)
        lo = np.floor(c).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, c - lo

    r0, r1, fr = coords(height, h0)
    c0, c1, fc = coords(width, w0)
    top = v[r0][:, c0] * (1 - fc) + v[r0][:, c1] * fc
    bot = v[r1][:, c0] * (1 - fc) + v[r1][:, c1] * fc
    return SaliencyMap(top * (1 - fr)[:, None] + bot * fr[:, None], width, height)


@lru_cache(maxsize=1)
def heat_lut() -> np.ndarray:
    """The shipped 256 x 3 colour table (blue = low, red = high)."""
    text = resources.files("gazekit").joinpath("data/heat_lut.txt").read_text(encoding="utf-8")
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    lut = np.array([[int(r), int(g), int(b)] for _, r, g, b in rows], dtype=np.uint8)
    if lut.shape != (256, 3):
        raise RuntimeError("corrupt colour table")
    return lut


def _quantize(values: np.ndarray, maxval: int) -> np.ndarray:
    peak = values.max() if values.size else 0.0
    if peak <= 0:
        return np.zeros(values.shape, dtype=np.int64)
    return np.rint(values / peak * maxval).astype(np.int64)


def _plain_rows(rows) -> str:
    lines = []
    for row in rows:
        line = ""
        for tok in row:
            if line and len(line) + 1 + len(tok) > 70:
                lines.append(line)
                line = tok
            else:
                line = f"{line} {tok}" if line else tok
        lines.append(line)
    return "\n".join(lines) + "\n"


def to_pgm(smap: SaliencyMap, binary: bool = False, maxval: int = 255) -> bytes:
    """Greyscale netpbm (P2 text or P5 binary) scaled so the peak is ``maxval``."""
    q = _quantize(smap.values, maxval)
    h, w = q.shape
    if binary:
        dtype = ">u2" if maxval > 255 else np.uint8
        return f"P5\n{w} {h}\n{maxval}\n".encode() + q.astype(dtype).tobytes()
    body = _plain_rows([[str(v) for v in row] for row in q.tolist()])
    return (f"P2\n{w} {h}\n{maxval}\n" + body).encode()


def colorize(smap: SaliencyMap) -> np.ndarray:
    return heat_lut()[_quantize(smap.values, 255)]


def to_ppm(smap: SaliencyMap, binary: bool = False) -> bytes:
    """Colour netpbm (P3 text or P6 binary) through the heat table."""
    rgb = colorize(smap)
    h, w, _ = rgb.shape
    if binary:
        return f"P6\n{w} {h}\n255\n".encode() + rgb.astype(np.uint8).tobytes()
    body = _plain_rows([[str(v) for v in row.reshape(-1)] for row in rgb.astype(int)])
    return (f"P3\n{w} {h}\n255\n" + body).encode()


def _f(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _svg(fixations: Sequence[Fixation], stimulus, radius_scale: float, show_duration_dots: bool) -> str:
    width, height = stimulus
    root = ET.Element("svg", {
        "xmlns": SVG_NS, "width": _f(width), "height": _f(height),
        "viewBox": f"0 0 {_f(width)} {_f(height)}",
    })
    lines = ET.SubElement(root, "g", {"class": "saccades", "fill": "none", "stroke": "#1f4e99", "stroke-width": "2"})
    for a, b in zip(fixations, fixations[1:]):
        ET.SubElement(lines, "line", {
            "x1": _f(a.centroid_x), "y1": _f(a.centroid_y), "x2": _f(b.centroid_x), "y2": _f(b.centroid_y),
        })
    if show_duration_dots:
        dots = ET.SubElement(root, "g", {"class": "fixations", "fill": "#d62728", "fill-opacity": "0.5", "stroke": "#000000"})
        for f in fixations:
            ET.SubElement(dots, "circle", {
                "cx": _f(f.centroid_x), "cy": _f(f.centroid_y),
                "r": _f(radius_scale * math.sqrt(f.duration / 1000.0)),
            })
        labels = ET.SubElement(root, "g", {"class": "labels", "font-size": "12", "text-anchor": "middle"})
        for k, f in enumerate(fixations, start=1):
            ET.SubElement(labels, "text", {"x": _f(f.centroid_x), "y": _f(f.centroid_y)}).text = str(k)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def render_scanpath(sp: Scanpath, stimulus, radius_scale: float = 1.0, show_duration_dots: bool = True) -> str:
    """SVG with saccade lines in temporal order and, optionally, numbered duration dots.

    Dot radius is ``radius_scale * sqrt(duration_ms)``, so dot area grows
    linearly with duration.
    """
    if len(sp) == 0:
        raise ValueError("cannot render an empty scanpath")
    return _svg(sp.fixations, stimulus, radius_scale, show_duration_dots)


def render_gaze_plot(sp: Scanpath, window, stimulus, radius_scale: float = 1.0) -> str:
    """Scanpath drawing restricted to fixations with onset in ``[start_us, end_us)``."""
    start, end = window
    chosen = [f for f in sp.fixations if start <= f.onset < end]
    if not chosen:
        if len(sp) == 0:
            raise ValueError("cannot render an empty scanpath")
        first = sp.fixations[0].onset
        last = sp.fixations[-1].onset + sp.fixations[-1].duration
        raise ValueError(f"window [{start}, {end}) us selects no fixation; scanpath spans [{first}, {last}] us")
    return _svg(chosen, stimulus, radius_scale, True)
