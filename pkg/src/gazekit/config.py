"""Pipeline configuration: INI file, ``section.key=value`` overrides, defaults.

Precedence is command-line override, then file, then built-in default.
When no file is named, ``$GAZEKIT_CONFIG`` is consulted.

Sections and keys (all optional)::

    [ingest]     mapping_file (path, or the built-ins "normalized" / "tobii")
    [columns]    inline column mapping, see gazekit.ingest
    [format]     delimiter, timestamp_unit, valid_values, sampling_rate_hz
    [geometry]   width_mm, height_mm, width_px, height_px, viewing_distance_mm
    [stimulus]   width, height (pixels; default: geometry resolution)
    [exclusion]  min_tracking_ratio, eye_policy, bad_calibration, invalid_trial
    [clean]      smoothing, smoothing_window, interpolation, interp_kernel,
                 max_interp_gap_ms, order
    [blinks]     min_ms, max_ms
    [detect]     detector (ivt | idt), velocity_threshold,
                 min_fixation_duration_ms, amplitude_mode,
                 dispersion_threshold, duration_threshold_ms
    [roi]        scheme (none | regular | percentile), cols, rows, bin_ms
    [saliency]   enabled, sigma_px, visual_angle_deg, weight_by_duration,
                 normalization, truncate_sigmas, binary
    [render]     enabled, radius_scale, show_duration_dots
    [output]     directory

``bad_calibration`` and ``invalid_trial`` list input file names (comma
separated) that the experimenter marked for exclusion.
"""
from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .events import IdtConfig, IvtConfig
from .ingest import NORMALIZED_MAPPING, TOBII_MAPPING, ColumnMapping, geometry_from_config
from .model import DisplayGeometry, EyePolicy
from .preprocess import CleanConfig
from .viz import SaliencyConfig

ENV_CONFIG = "GAZEKIT_CONFIG"
BUILTIN_MAPPINGS = {"normalized": NORMALIZED_MAPPING, "tobii": TOBII_MAPPING}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RoiSpec:
    scheme: str = "regular"  # regular | percentile
    cols: int = 4
    rows: int = 2
    bin_ms: Optional[float] = None


@dataclass(frozen=True)
class RenderSpec:
    radius_scale: float = 1.0
    show_duration_dots: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    mapping: ColumnMapping = NORMALIZED_MAPPING
    eye_policy: EyePolicy = EyePolicy.AVERAGE
    min_tracking_ratio: float = 0.75
    bad_calibration: frozenset = frozenset()
    invalid_trial: frozenset = frozenset()
    clean: CleanConfig = CleanConfig()
    blink_min_ms: float = 75.0
    blink_max_ms: float = 500.0
    detector: str = "ivt"
    ivt: IvtConfig = IvtConfig()
    idt: IdtConfig = IdtConfig()
    roi: Optional[RoiSpec] = None
    saliency: Optional[SaliencyConfig] = None
    saliency_binary: bool = True
    render: Optional[RenderSpec] = RenderSpec()
    stimulus: Optional[tuple] = None
    output_dir: str = "gazekit-out"

    def __post_init__(self):
        if self.detector not in ("ivt", "idt"):
            raise ConfigError(f"detector must be ivt or idt, got {self.detector!r}")
        if not 0.0 <= self.min_tracking_ratio <= 1.0:
            raise ConfigError("min_tracking_ratio must lie in [0, 1]")

    @property
    def geometry(self) -> Optional[DisplayGeometry]:
        return self.mapping.geometry

    def stimulus_size(self, geometry: Optional[DisplayGeometry] = None):
        if self.stimulus is not None:
            return self.stimulus
        g = geometry or self.geometry
        return None if g is None else (g.width_px, g.height_px)

    def semantic_dict(self) -> dict:
        """Every field that influences results; the output directory is excluded."""
        d = _plain(self)
        d.pop("output_dir")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (frozenset, set)):
        return sorted(_plain(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str.lower
    return parser


def apply_overrides(parser: configparser.ConfigParser, overrides: Sequence[str]) -> None:
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot or not section or not option:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option.lower(), value.strip())


def read_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> configparser.ConfigParser:
    parser = new_parser()
    path = path or os.environ.get(ENV_CONFIG) or None
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    apply_overrides(parser, overrides)
    return parser


def _get(parser, section, key, conv=str, default=None):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        if conv is bool:
            return parser.getboolean(section, key)
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _names(parser, section, key) -> frozenset:
    raw = _get(parser, section, key, str, "")
    return frozenset(p.strip() for p in raw.split(",") if p.strip())


_KNOWN = {
    "ingest": {"mapping_file"},
    "columns": None, "format": None, "geometry": None, "trace": None,
    "stimulus": {"width", "height"},
    "exclusion": {"min_tracking_ratio", "eye_policy", "bad_calibration", "invalid_trial"},
    "clean": {"smoothing", "smoothing_window", "interpolation", "interp_kernel", "max_interp_gap_ms", "order"},
    "blinks": {"min_ms", "max_ms"},
    "detect": {"detector", "velocity_threshold", "min_fixation_duration_ms", "amplitude_mode",
               "dispersion_threshold", "duration_threshold_ms"},
    "roi": {"scheme", "cols", "rows", "bin_ms"},
    "saliency": {"enabled", "sigma_px", "visual_angle_deg", "weight_by_duration", "normalization",
                 "truncate_sigmas", "binary"},
    "render": {"enabled", "radius_scale", "show_duration_dots"},
    "output": {"directory"},
}


def build_config(parser: configparser.ConfigParser, base_dir: Optional[Path] = None) -> PipelineConfig:
    """Validate a parsed config and build the typed :class:`PipelineConfig`."""
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown config section [{section}]")
        allowed = _KNOWN[section]
        if allowed is not None:
            extra = set(parser.options(section)) - allowed
            if extra:
                raise ConfigError(f"unknown key(s) in [{section}]: {sorted(extra)}")
    try:
        return _build(parser, base_dir)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def _build(parser, base_dir):
    mapping_file = _get(parser, "ingest", "mapping_file")
    if mapping_file:
        if mapping_file in BUILTIN_MAPPINGS:
            mapping = BUILTIN_MAPPINGS[mapping_file]
        else:
            p = Path(mapping_file)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            if not p.is_file():
                raise ConfigError(f"mapping file {p} does not exist")
            mapping = ColumnMapping.load(p)
        g = geometry_from_config(parser)
        if g is not None:
            mapping = dataclasses.replace(mapping, geometry=g)
    elif parser.has_section("columns") or parser.has_section("format"):
        mapping = ColumnMapping.from_config(parser)
    else:
        mapping = dataclasses.replace(NORMALIZED_MAPPING, geometry=geometry_from_config(parser))

    clean = CleanConfig(
        smoothing=_get(parser, "clean", "smoothing", str, "none"),
        smoothing_window=_get(parser, "clean", "smoothing_window", int, 5),
        interpolation=_get(parser, "clean", "interpolation", str, "linear"),
        interp_kernel=_get(parser, "clean", "interp_kernel", int, 2),
        max_interp_gap_ms=_get(parser, "clean", "max_interp_gap_ms", float, 75.0),
        order=_get(parser, "clean", "order", str, "interpolate_first"),
    )
    ivt = IvtConfig(
        velocity_threshold=_get(parser, "detect", "velocity_threshold", float, 30.0),
        min_fixation_duration_ms=_get(parser, "detect", "min_fixation_duration_ms", float, 100.0),
        amplitude_mode=_get(parser, "detect", "amplitude_mode", str, "centroid"),
    )
    idt = IdtConfig(
        dispersion_threshold=_get(parser, "detect", "dispersion_threshold", float, 1.0),
        duration_threshold_ms=_get(parser, "detect", "duration_threshold_ms", float, 100.0),
    )
    roi = None
    scheme = _get(parser, "roi", "scheme", str, "none")
    if scheme != "none":
        if scheme not in ("regular", "percentile"):
            raise ConfigError(f"[roi] scheme must be none, regular or percentile, got {scheme!r}")
        roi = RoiSpec(scheme, _get(parser, "roi", "cols", int, 4), _get(parser, "roi", "rows", int, 2),
                      _get(parser, "roi", "bin_ms", float, None))
    saliency = None
    if _get(parser, "saliency", "enabled", bool, False):
        saliency = SaliencyConfig(
            sigma_px=_get(parser, "saliency", "sigma_px", float, None),
            visual_angle_deg=_get(parser, "saliency", "visual_angle_deg", float, 2.0),
            geometry=mapping.geometry,
            weight_by_duration=_get(parser, "saliency", "weight_by_duration", bool, True),
            normalization=_get(parser, "saliency", "normalization", str, "max_to_one"),
            truncate_sigmas=_get(parser, "saliency", "truncate_sigmas", float, 4.0),
        )
        if saliency.sigma_px is None and saliency.geometry is None:
            raise ConfigError("[saliency] needs sigma_px or a [geometry] section")
    render = None
    if _get(parser, "render", "enabled", bool, True):
        render = RenderSpec(_get(parser, "render", "radius_scale", float, 1.0),
                            _get(parser, "render", "show_duration_dots", bool, True))
    stimulus = None
    w, h = _get(parser, "stimulus", "width", int), _get(parser, "stimulus", "height", int)
    if (w is None) != (h is None):
        raise ConfigError("[stimulus] needs both width and height")
    if w is not None:
        stimulus = (w, h)
    return PipelineConfig(
        mapping=mapping,
        eye_policy=EyePolicy(_get(parser, "exclusion", "eye_policy", str, "average")),
        min_tracking_ratio=_get(parser, "exclusion", "min_tracking_ratio", float, 0.75),
        bad_calibration=_names(parser, "exclusion", "bad_calibration"),
        invalid_trial=_names(parser, "exclusion", "invalid_trial"),
        clean=clean,
        blink_min_ms=_get(parser, "blinks", "min_ms", float, 75.0),
        blink_max_ms=_get(parser, "blinks", "max_ms", float, 500.0),
        detector=_get(parser, "detect", "detector", str, "ivt"),
        ivt=ivt, idt=idt, roi=roi, saliency=saliency,
        saliency_binary=_get(parser, "saliency", "binary", bool, True),
        render=render, stimulus=stimulus,
        output_dir=_get(parser, "output", "directory", str, "gazekit-out"),
    )


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> PipelineConfig:
    path = path or os.environ.get(ENV_CONFIG) or None
    parser = read_config(path, overrides)
    base = Path(path).parent if path else None
    return build_config(parser, base)
