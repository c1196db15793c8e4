"""Pipeline configuration and the flat key-value config file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

MODES = ("fused", "measurement_only")


@dataclass
class PipelineConfig:
    """Knobs shared by scoring, localization, and the CLI.

    ``mode`` selects between full fusion and a measurement-only baseline
    that scores each proposal by its raw low-dimensional similarity with
    no gate (b, w, and gate_threshold are then ignored).
    """

    b: float = 4.85
    w: float = 5.0
    gate_threshold: float = 0.65
    sample_rate: float = 1.0
    smoothing_window: int = 1
    min_peak_height: float = 0.0
    iou_min: float = 0.3
    track_score_min: float = 0.3
    mode: str = "fused"

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise ValueError(f"b must be finite and > 0, got {self.b}")
        if not (math.isfinite(self.w) and self.w > 0.0):
            raise ValueError(f"w must be finite and > 0, got {self.w}")
        if not (math.isfinite(self.gate_threshold) and 0.0 <= self.gate_threshold <= 1.0):
            raise ValueError(f"gate_threshold must lie in [0, 1], got {self.gate_threshold}")
        if not (math.isfinite(self.sample_rate) and 0.0 < self.sample_rate <= 1.0):
            raise ValueError(f"sample_rate must lie in (0, 1], got {self.sample_rate}")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError(f"smoothing_window must be an odd positive integer, got {self.smoothing_window}")
        if not math.isfinite(self.min_peak_height) or self.min_peak_height < 0.0:
            raise ValueError(f"min_peak_height must be >= 0, got {self.min_peak_height}")
        if not (math.isfinite(self.iou_min) and 0.0 <= self.iou_min <= 1.0):
            raise ValueError(f"iou_min must lie in [0, 1], got {self.iou_min}")
        if not math.isfinite(self.track_score_min) or self.track_score_min < 0.0:
            raise ValueError(f"track_score_min must be >= 0, got {self.track_score_min}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def parse_config_text(text: str) -> PipelineConfig:
    """Parse ``key = value`` lines into a PipelineConfig.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value

    kwargs: dict[str, object] = {}
    for key, value in raw.items():
        if key == "mode":
            kwargs[key] = value
        elif key == "smoothing_window":
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return PipelineConfig(**kwargs)


def dump_config(cfg: PipelineConfig) -> str:
    """Render a PipelineConfig in the flat key-value file format."""
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(PipelineConfig)]
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
