"""Per-frame signal construction, peak detection, and response-track assembly.

Given per-frame candidate boxes with their two similarity scores, this module
builds the per-frame best fused score over time, finds local maxima, selects
the most recent one, and grows a track from the winning box in both temporal
directions using a greedy overlap tracker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import PipelineConfig
from .fusion import score_frame_values
from .geometry import BoundingBox, iou


class NoPeakError(Exception):
    """Raised when a signal contains no local maximum."""


@dataclass(frozen=True)
class Proposal:
    """One candidate box with its prior mean and measurement score."""

    box: BoundingBox
    prior_mean: float
    measurement_s: float

    def __post_init__(self):
        if not (math.isfinite(self.prior_mean) and 0.0 <= self.prior_mean <= 1.0):
            raise ValueError(f"prior_mean must lie in [0, 1], got {self.prior_mean}")
        if not (math.isfinite(self.measurement_s) and 0.0 <= self.measurement_s <= 1.0):
            raise ValueError(f"measurement_s must lie in [0, 1], got {self.measurement_s}")


@dataclass
class FrameProposals:
    """All proposals of one frame; the list may be empty."""

    frame_idx: int
    proposals: list[Proposal] = field(default_factory=list)

    def __post_init__(self):
        if self.frame_idx < 0:
            raise ValueError(f"frame_idx must be >= 0, got {self.frame_idx}")


@dataclass
class ClipData:
    """Ingested per-frame proposals for one (clip, query) pair."""

    clip_id: str
    query_id: str
    frames: list[FrameProposals] = field(default_factory=list)

    def __post_init__(self):
        if not self.clip_id or not self.query_id:
            raise ValueError("clip_id and query_id must be non-empty")

    @property
    def key(self) -> tuple[str, str]:
        return (self.clip_id, self.query_id)


@dataclass
class SimilaritySignal:
    """Per-retained-frame best scores, parallel to their original frame indices."""

    frame_idxs: list[int]
    values: list[float]

    def __post_init__(self):
        if len(self.frame_idxs) != len(self.values):
            raise ValueError("frame_idxs and values must have equal length")
        if any(b <= a for a, b in zip(self.frame_idxs, self.frame_idxs[1:])):
            raise ValueError("frame_idxs must be strictly increasing")


@dataclass
class ScoredFrame:
    """One retained frame with all proposal scores and the arg-max, if any.

    ``values`` holds the fused score per proposal (or the raw measurement
    score in measurement-only mode).  ``best`` is None when the frame has no
    proposals or every score is zero.
    """

    frame_idx: int
    proposals: list[Proposal]
    values: np.ndarray
    best: Optional[int]


@dataclass(frozen=True)
class TrackEntry:
    frame_idx: int
    box: BoundingBox
    score: float


@dataclass
class ResponseTrack:
    """Final per-frame box sequence around the selected peak."""

    entries: list[TrackEntry]
    peak_frame: int
    confidence: float

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a response track must contain at least one entry")
        idxs = [e.frame_idx for e in self.entries]
        if any(b <= a for a, b in zip(idxs, idxs[1:])):
            raise ValueError("track frame indices must be strictly increasing")
        if self.peak_frame not in idxs:
            raise ValueError("peak_frame must be one of the track's frame indices")

    @property
    def frame_range(self) -> tuple[int, int]:
        return (self.entries[0].frame_idx, self.entries[-1].frame_idx)


def sample_stride(sample_rate: float) -> int:
    """Frame stride for a sample rate in (0, 1]: round(1 / rate), half away from zero."""
    if not (0.0 < sample_rate <= 1.0):
        raise ValueError(f"sample_rate must lie in (0, 1], got {sample_rate}")
    return max(1, int(math.floor(1.0 / sample_rate + 0.5)))


def build_signal(
    frames: Sequence[FrameProposals],
    cfg: PipelineConfig,
) -> tuple[SimilaritySignal, list[ScoredFrame]]:
    """Score every retained frame and return the similarity signal.

    Frames must be sorted by strictly increasing frame index.  The stride
    derived from ``cfg.sample_rate`` keeps the first frame and every
    stride-th frame after it.  Frames without proposals, or whose scores are
    all zero, contribute signal value 0 and no best proposal.
    """
    if len(frames) == 0:
        raise ValueError("cannot build a signal from an empty clip")
    idxs = [f.frame_idx for f in frames]
    if any(b <= a for a, b in zip(idxs, idxs[1:])):
        raise ValueError("frames must be sorted by strictly increasing frame_idx")

    stride = sample_stride(cfg.sample_rate)
    retained = list(frames[::stride])

    scored: list[ScoredFrame] = []
    values: list[float] = []
    for frame in retained:
        if not frame.proposals:
            scored.append(ScoredFrame(frame.frame_idx, [], np.zeros(0), None))
            values.append(0.0)
            continue
        if cfg.mode == "measurement_only":
            frame_values = np.array([p.measurement_s for p in frame.proposals], dtype=np.float64)
        else:
            means = np.array([p.prior_mean for p in frame.proposals], dtype=np.float64)
            ss = np.array([p.measurement_s for p in frame.proposals], dtype=np.float64)
            frame_values, _, _ = score_frame_values(means, ss, cfg.b, cfg.w, cfg.gate_threshold)
        peak_value = float(frame_values.max())
        best = int(np.argmax(frame_values)) if peak_value > 0.0 else None
        scored.append(ScoredFrame(frame.frame_idx, frame.proposals, frame_values, best))
        values.append(peak_value if best is not None else 0.0)

    signal = SimilaritySignal([f.frame_idx for f in retained], values)
    return signal, scored


def smooth_signal(values: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average with an edge-truncated window (window 1 = no-op)."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"smoothing window must be an odd positive integer, got {window}")
    v = np.asarray(values, dtype=np.float64)
    if window == 1:
        return v.copy()
    half = window // 2
    out = np.empty_like(v)
    for i in range(v.size):
        lo = max(0, i - half)
        hi = min(v.size, i + half + 1)
        out[i] = v[lo:hi].mean()
    return out


def find_peaks(
    values: Sequence[float],
    smoothing_window: int = 1,
    min_height: float = 0.0,
) -> list[int]:
    """Indices of local maxima of the (optionally smoothed) signal, ascending.

    An index is a peak when its value strictly exceeds both neighbors.  A
    plateau of equal values strictly above both shoulders reports its last
    index; endpoints qualify when strictly greater than their single
    neighbor.  A constant signal has no peak, except that a single-sample
    signal reports index 0.  Peaks with smoothed value below ``min_height``
    are dropped.
    """
    n = len(values)
    if n == 0:
        raise ValueError("cannot find peaks in an empty signal")
    v = smooth_signal(values, smoothing_window)
    if n == 1:
        return [0] if v[0] >= min_height else []

    peaks: list[int] = []
    run_start = 0
    for i in range(n):
        if i + 1 < n and v[i + 1] == v[i]:
            continue  # still inside a plateau run
        run_end = i
        above_left = run_start == 0 or v[run_start] > v[run_start - 1]
        above_right = run_end == n - 1 or v[run_end] > v[run_end + 1]
        spans_all = run_start == 0 and run_end == n - 1
        if above_left and above_right and not spans_all and v[run_end] >= min_height:
            peaks.append(run_end)
        run_start = i + 1
    return peaks


def most_recent_peak(peaks: Sequence[int]) -> int:
    """Largest peak index; raises NoPeakError on an empty list."""
    if len(peaks) == 0:
        raise NoPeakError("no peak found")
    return max(peaks)


def reference_tracker_step(
    prev_box: BoundingBox,
    frame: ScoredFrame,
    iou_min: float = 0.3,
    score_min: float = 0.3,
) -> Optional[tuple[int, BoundingBox, float]]:
    """Greedy continuation: best-overlapping admissible candidate in one frame.

    Candidates need IoU with the previous box >= ``iou_min`` and score >=
    ``score_min``.  The winner maximizes IoU; ties break by higher score,
    then by earlier list position.  Returns (index, box, score) or None.
    """
    best_key: Optional[tuple[float, float, int]] = None
    best_pick: Optional[tuple[int, BoundingBox, float]] = None
    for i, prop in enumerate(frame.proposals):
        score = float(frame.values[i])
        if score < score_min:
            continue
        overlap = iou(prev_box, prop.box)
        if overlap < iou_min:
            continue
        key = (overlap, score, -i)
        if best_key is None or key > best_key:
            best_key = key
            best_pick = (i, prop.box, score)
    return best_pick


def assemble_track(
    scored: Sequence[ScoredFrame],
    peak_pos: int,
    iou_min: float = 0.3,
    score_min: float = 0.3,
) -> ResponseTrack:
    """Grow a track from the peak frame's best proposal in both directions.

    ``peak_pos`` indexes into the retained-frame sequence.  Each direction
    extends one retained frame at a time until the tracker finds no
    admissible continuation.
    """
    if not (0 <= peak_pos < len(scored)):
        raise ValueError(f"peak position {peak_pos} out of range")
    peak = scored[peak_pos]
    if peak.best is None:
        raise ValueError(f"peak frame {peak.frame_idx} has no best proposal")

    peak_box = peak.proposals[peak.best].box
    peak_score = float(peak.values[peak.best])
    entries = [TrackEntry(peak.frame_idx, peak_box, peak_score)]

    prev = peak_box
    for frame in scored[peak_pos + 1 :]:
        step = reference_tracker_step(prev, frame, iou_min, score_min)
        if step is None:
            break
        _, box, score = step
        entries.append(TrackEntry(frame.frame_idx, box, score))
        prev = box

    prev = peak_box
    backward: list[TrackEntry] = []
    for frame in reversed(scored[:peak_pos]):
        step = reference_tracker_step(prev, frame, iou_min, score_min)
        if step is None:
            break
        _, box, score = step
        backward.append(TrackEntry(frame.frame_idx, box, score))
        prev = box
    backward.reverse()

    return ResponseTrack(backward + entries, peak.frame_idx, peak_score)
