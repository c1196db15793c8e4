"""Evaluation of predicted response tracks against ground-truth tracks.

Four aggregate metrics are produced: temporal and spatio-temporal average
precision over IoU threshold sets, the fraction of queries with minimal
spatio-temporal overlap (success), and the mean fraction of ground-truth
frames whose predicted box overlaps well (recovery).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .geometry import BoundingBox, intersection_area, iou
from .localization import ResponseTrack

DEFAULT_TAU_SET = (0.25, 0.5, 0.75, 0.95)
DEFAULT_SUCCESS_THRESHOLD = 0.05
DEFAULT_RECOVERY_IOU = 0.5


@dataclass
class ClipAnnotation:
    """Ground-truth track for one (clip, query) pair."""

    clip_id: str
    query_id: str
    gt_track: list[tuple[int, BoundingBox]]

    def __post_init__(self):
        if not self.clip_id or not self.query_id:
            raise ValueError("clip_id and query_id must be non-empty")
        if not self.gt_track:
            raise ValueError("gt_track must contain at least one entry")
        idxs = [f for f, _ in self.gt_track]
        if any(b <= a for a, b in zip(idxs, idxs[1:])):
            raise ValueError("gt_track frame indices must be strictly increasing")

    @property
    def key(self) -> tuple[str, str]:
        return (self.clip_id, self.query_id)

    @property
    def frame_range(self) -> tuple[int, int]:
        return (self.gt_track[0][0], self.gt_track[-1][0])


@dataclass
class Prediction:
    """Predicted track for one (clip, query) pair; track None records a miss."""

    clip_id: str
    query_id: str
    track: Optional[ResponseTrack]

    def __post_init__(self):
        if not self.clip_id or not self.query_id:
            raise ValueError("clip_id and query_id must be non-empty")

    @property
    def key(self) -> tuple[str, str]:
        return (self.clip_id, self.query_id)


@dataclass
class QueryMetrics:
    """Per-query evaluation breakdown."""

    clip_id: str
    query_id: str
    temporal_iou: float
    spatiotemporal_iou: float
    success: bool
    recovery: float
    confidence: Optional[float]


@dataclass
class MetricReport:
    tAP: float
    stAP: float
    success: float
    recovery: float
    per_query: list[QueryMetrics] = field(default_factory=list)


def temporal_iou(pred_range: tuple[int, int], gt_range: tuple[int, int]) -> float:
    """IoU of two inclusive integer frame intervals."""
    (p0, p1), (g0, g1) = pred_range, gt_range
    if p1 < p0 or g1 < g0:
        raise ValueError("frame intervals must satisfy low <= high")
    inter = min(p1, g1) - max(p0, g0) + 1
    if inter <= 0:
        return 0.0
    union = (p1 - p0 + 1) + (g1 - g0 + 1) - inter
    return inter / union


def spatiotemporal_iou(
    pred: Mapping[int, BoundingBox],
    gt: Mapping[int, BoundingBox],
) -> float:
    """Sum of per-frame intersection areas over sum of per-frame union areas.

    Frames are taken from the union of both tracks; a frame covered by only
    one track contributes zero intersection and that box's area to the union.
    """
    pred = dict(pred)
    gt = dict(gt)
    inter_sum = 0.0
    union_sum = 0.0
    for f in sorted(set(pred) | set(gt)):
        pb = pred.get(f)
        gb = gt.get(f)
        if pb is not None and gb is not None:
            inter = intersection_area(pb, gb)
            union = pb.area + gb.area - inter
        elif pb is not None:
            inter, union = 0.0, pb.area
        else:
            inter, union = 0.0, gb.area
        inter_sum += inter
        union_sum += union
    if union_sum <= 0.0:
        return 0.0
    return inter_sum / union_sum


def average_precision(matches: Sequence[bool], n_positives: int) -> float:
    """Area under the precision-recall step curve for a ranked match list.

    ``matches`` must be ordered by descending confidence; ``n_positives`` is
    the total number of annotated queries, so absent predictions depress
    recall.  Uses all-point interpolation (precision at each recall level is
    the maximum precision at any recall at least that high).
    """
    if n_positives <= 0:
        return 0.0
    precisions: list[float] = []
    recalls: list[float] = []
    tp = 0
    for rank, matched in enumerate(matches, start=1):
        if matched:
            tp += 1
        precisions.append(tp / rank)
        recalls.append(tp / n_positives)

    mprec = [0.0] + precisions + [0.0]
    mrec = [0.0] + recalls + [1.0]
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    ap = 0.0
    for i in range(1, len(mrec)):
        if mrec[i] != mrec[i - 1]:
            ap += (mrec[i] - mrec[i - 1]) * mprec[i]
    return ap


def _track_boxes(track: ResponseTrack) -> dict[int, BoundingBox]:
    return {e.frame_idx: e.box for e in track.entries}


def evaluate(
    predictions: Sequence[Prediction],
    annotations: Sequence[ClipAnnotation],
    tau_temporal: Sequence[float] = DEFAULT_TAU_SET,
    tau_spatiotemporal: Sequence[float] = DEFAULT_TAU_SET,
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD,
    recovery_iou: float = DEFAULT_RECOVERY_IOU,
) -> MetricReport:
    """Score a prediction set against its annotations.

    Every prediction key must have a matching annotation; annotated queries
    without a prediction (or with a recorded miss) count against recall,
    success, and recovery.  Ranking ties on confidence break by query key so
    the report is invariant under input permutation.
    """
    ann_counts = Counter(a.key for a in annotations)
    dup = [k for k, c in ann_counts.items() if c > 1]
    if dup:
        raise ValueError(f"duplicate annotation keys: {sorted(dup)}")
    pred_counts = Counter(p.key for p in predictions)
    dup = [k for k, c in pred_counts.items() if c > 1]
    if dup:
        raise ValueError(f"duplicate prediction keys: {sorted(dup)}")
    unmatched = sorted(set(pred_counts) - set(ann_counts))
    if unmatched:
        raise ValueError(f"predictions without annotations: {unmatched}")

    pred_map = {p.key: p for p in predictions}
    rows: list[QueryMetrics] = []
    for ann in sorted(annotations, key=lambda a: a.key):
        pred = pred_map.get(ann.key)
        if pred is None or pred.track is None:
            rows.append(QueryMetrics(ann.clip_id, ann.query_id, 0.0, 0.0, False, 0.0, None))
            continue
        track = pred.track
        t_iou = temporal_iou(track.frame_range, ann.frame_range)
        boxes = _track_boxes(track)
        gt_boxes = dict(ann.gt_track)
        st_iou = spatiotemporal_iou(boxes, gt_boxes)
        recovered = sum(
            1
            for f, gb in ann.gt_track
            if f in boxes and iou(boxes[f], gb) >= recovery_iou
        )
        rows.append(
            QueryMetrics(
                ann.clip_id,
                ann.query_id,
                t_iou,
                st_iou,
                st_iou >= success_threshold,
                recovered / len(ann.gt_track),
                track.confidence,
            )
        )

    n_queries = len(rows)
    if n_queries == 0:
        return MetricReport(0.0, 0.0, 0.0, 0.0, [])

    ranked = sorted(
        (r for r in rows if r.confidence is not None),
        key=lambda r: (-r.confidence, r.clip_id, r.query_id),
    )
    t_ap = _mean(
        average_precision([r.temporal_iou >= tau for r in ranked], n_queries)
        for tau in tau_temporal
    )
    st_ap = _mean(
        average_precision([r.spatiotemporal_iou >= tau for r in ranked], n_queries)
        for tau in tau_spatiotemporal
    )
    success = sum(1 for r in rows if r.success) / n_queries
    recovery = sum(r.recovery for r in rows) / n_queries
    return MetricReport(t_ap, st_ap, success, recovery, rows)


def _mean(values) -> float:
    values = list(values)
    if not values:
        return 0.0
    return math.fsum(values) / len(values)


def render_report_table(report: MetricReport, label: str = "prediction") -> str:
    """Human-readable one-row summary table of the four aggregate metrics."""
    header = f"{'Method':<16} {'tAP':>8} {'stAP':>8} {'success':>8} {'recovery':>9}"
    rule = "-" * len(header)
    row = (
        f"{label:<16} {report.tAP * 100:>7.2f}% {report.stAP * 100:>7.2f}% "
        f"{report.success * 100:>7.2f}% {report.recovery * 100:>8.2f}%"
    )
    return "\n".join([header, rule, row])
