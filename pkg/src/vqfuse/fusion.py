"""Beta-Bernoulli fusion of two bounded similarity scores.

A high-dimensional similarity source supplies a prior mean in [0, 1]; a
low-dimensional source supplies a measurement score ``s`` whose confidence
``w`` acts as a pseudo-trial count.  The prior mean is lifted to a Beta
distribution, the measurement is mapped to Bernoulli pseudo-counts, and the
fused score is the posterior mean of the conjugate update -- provided both
raw scores clear a hard gate.  Proposals whose prior mean is exactly 1 are
handled by dedicated frame-level rules because the Beta shape parameter
``a`` diverges there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_B = 4.85
DEFAULT_W = 5.0
DEFAULT_GATE_THRESHOLD = 0.65

# Cap applied to the prior mean before the a = b*mean/(1-mean) division so
# float rounding of near-1 means cannot produce an infinite a.
_MEAN_CAP = 1.0 - 1e-12


@dataclass(frozen=True)
class BetaParams:
    """Shape of a Beta distribution: pseudo-successes ``a``, pseudo-failures ``b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ValueError(f"Beta parameter a must be finite and > 0, got {self.a}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise ValueError(f"Beta parameter b must be finite and > 0, got {self.b}")


@dataclass(frozen=True)
class Measurement:
    """Low-dimensional similarity ``s`` in [0, 1] at confidence weight ``w`` > 0."""

    s: float
    w: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and 0.0 <= self.s <= 1.0):
            raise ValueError(f"measurement s must lie in [0, 1], got {self.s}")
        if not (math.isfinite(self.w) and self.w > 0.0):
            raise ValueError(f"measurement weight w must be finite and > 0, got {self.w}")


@dataclass(frozen=True)
class PseudoCounts:
    """Bernoulli trial counts: ``n`` trials with ``k`` successes, 0 <= k <= n."""

    n: float
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0.0):
            raise ValueError(f"trial count n must be finite and > 0, got {self.n}")
        if not (math.isfinite(self.k) and 0.0 <= self.k <= self.n):
            raise ValueError(f"success count k must lie in [0, n], got {self.k}")


@dataclass(frozen=True)
class FusedScore:
    """Gated posterior-mean similarity for one proposal.

    ``gate`` is False when either raw score failed the threshold (value is
    forced to 0).  ``degenerate`` marks proposals whose prior mean was
    exactly 1 and therefore bypassed the Beta update.
    """

    value: float
    gate: bool
    degenerate: bool = False


def cosine_similarity(u, v) -> float:
    """Cosine similarity of two non-negative feature vectors, clamped to [0, 1].

    Raises ValueError on empty input, dimension mismatch, non-finite or
    negative components, or a zero-norm vector.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.size == 0 or v.size == 0:
        raise ValueError("feature vectors must be non-empty 1-D sequences")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.size} vs {v.size}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("feature vectors must be finite")
    if np.any(u < 0.0) or np.any(v < 0.0):
        raise ValueError("feature vector components must be non-negative")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("zero-norm feature vector")
    return float(min(1.0, max(0.0, float(np.dot(u, v)) / (nu * nv))))


def beta_from_mean(mean: float, b: float) -> BetaParams:
    """Beta parameters with the given expected value and failure shape ``b``.

    ``mean`` must lie strictly inside (0, 1); callers route mean == 1 to the
    degenerate path and mean == 0 to gate failure before getting here.
    """
    if not (math.isfinite(mean) and 0.0 < mean < 1.0):
        raise ValueError(f"prior mean must lie in (0, 1), got {mean}")
    if not (math.isfinite(b) and b > 0.0):
        raise ValueError(f"shape parameter b must be finite and > 0, got {b}")
    m = min(mean, _MEAN_CAP)
    return BetaParams(b * m / (1.0 - m), b)


def map_measurement(m: Measurement) -> PseudoCounts:
    """Map a continuous score to pseudo-counts: n = w trials, k = w*s successes.

    k is deliberately not rounded; fractional counts keep k/n == s and the
    posterior a convex combination of prior mean and s.
    """
    return PseudoCounts(n=m.w, k=m.w * m.s)


def posterior(prior: BetaParams, counts: PseudoCounts) -> BetaParams:
    """Conjugate Beta update: (a, b) + (n, k) -> (a + k, b + n - k)."""
    return BetaParams(prior.a + counts.k, prior.b + (counts.n - counts.k))


def posterior_mean(p: BetaParams) -> float:
    """Expected value a / (a + b) of a Beta distribution."""
    return p.a / (p.a + p.b)


def gate(prior_mean: float, m: Measurement, threshold: float = DEFAULT_GATE_THRESHOLD) -> bool:
    """True iff both raw scores strictly exceed the threshold."""
    if not (math.isfinite(threshold) and 0.0 <= threshold <= 1.0):
        raise ValueError(f"gate threshold must lie in [0, 1], got {threshold}")
    return prior_mean > threshold and m.s > threshold


def fuse(
    prior_mean: float,
    m: Measurement,
    b: float = DEFAULT_B,
    threshold: float = DEFAULT_GATE_THRESHOLD,
) -> FusedScore:
    """Fuse one (prior mean, measurement) pair into a gated similarity score.

    Gate failure yields value 0.  A prior mean of exactly 1 yields the
    degenerate marker with value 1 when gated in; cross-proposal handling of
    that case belongs to :func:`score_frame_proposals`.
    """
    if not (math.isfinite(prior_mean) and 0.0 <= prior_mean <= 1.0):
        raise ValueError(f"prior mean must lie in [0, 1], got {prior_mean}")
    degenerate = prior_mean == 1.0
    if not gate(prior_mean, m, threshold):
        return FusedScore(0.0, False, degenerate)
    if degenerate:
        return FusedScore(1.0, True, True)
    params = beta_from_mean(prior_mean, b)
    counts = map_measurement(m)
    return FusedScore(posterior_mean(posterior(params, counts)), True, False)


def fuse_arrays(
    prior_means: np.ndarray,
    ss: np.ndarray,
    b: float,
    w: float,
    threshold: float = DEFAULT_GATE_THRESHOLD,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`fuse` over parallel arrays of prior means and scores.

    Returns (values, gate mask, degenerate mask).  The arithmetic mirrors the
    scalar path expression-for-expression so results are bit-identical.
    """
    prior_means = np.asarray(prior_means, dtype=np.float64)
    ss = np.asarray(ss, dtype=np.float64)
    if prior_means.shape != ss.shape:
        raise ValueError("prior and measurement arrays must have equal shape")
    if np.any(prior_means < 0.0) or np.any(prior_means > 1.0) or not np.all(np.isfinite(prior_means)):
        raise ValueError("prior means must lie in [0, 1]")
    if np.any(ss < 0.0) or np.any(ss > 1.0) or not np.all(np.isfinite(ss)):
        raise ValueError("measurement scores must lie in [0, 1]")
    if not (math.isfinite(b) and b > 0.0):
        raise ValueError(f"shape parameter b must be finite and > 0, got {b}")
    if not (math.isfinite(w) and w > 0.0):
        raise ValueError(f"measurement weight w must be finite and > 0, got {w}")
    if not (math.isfinite(threshold) and 0.0 <= threshold <= 1.0):
        raise ValueError(f"gate threshold must lie in [0, 1], got {threshold}")

    gates = (prior_means > threshold) & (ss > threshold)
    degenerate = prior_means == 1.0

    m = np.minimum(prior_means, _MEAN_CAP)
    # Guard the division for entries that will be masked out anyway (m == 0
    # is gated out; the cap keeps 1 - m > 0).
    safe_m = np.where(m == 0.0, 0.5, m)
    a = b * safe_m / (1.0 - safe_m)
    k = w * ss
    post_a = a + k
    post_b = b + (w - k)
    values = post_a / (post_a + post_b)
    values = np.where(degenerate, 1.0, values)
    values = np.where(gates, values, 0.0)
    return values, gates, degenerate


def score_frame_values(
    prior_means: np.ndarray,
    ss: np.ndarray,
    b: float,
    w: float,
    threshold: float = DEFAULT_GATE_THRESHOLD,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frame-level scoring on arrays: per-proposal fusion plus the mean == 1 rules.

    Returns (values, gate mask, degenerate mask) after cross-proposal
    adjustment.  When one or more proposals carry a prior mean of exactly 1:

    * if any of them has s above the threshold, the one with the highest s
      (earliest on ties) scores 1 and every other proposal scores 0;
    * otherwise all mean-1 proposals score 0 and the rest score normally.
    """
    values, gates, degenerate = fuse_arrays(prior_means, ss, b, w, threshold)
    if degenerate.any():
        ss = np.asarray(ss, dtype=np.float64)
        passing = np.flatnonzero(degenerate & (ss > threshold))
        if passing.size:
            winner = int(passing[np.argmax(ss[passing])])  # argmax keeps first on ties
            values = np.zeros_like(values)
            gates = np.zeros_like(gates)
            values[winner] = 1.0
            gates[winner] = True
    return values, gates, degenerate


def score_frame_proposals(
    proposals: Sequence[tuple[float, float]],
    b: float = DEFAULT_B,
    w: float = DEFAULT_W,
    threshold: float = DEFAULT_GATE_THRESHOLD,
) -> list[FusedScore]:
    """Score all proposals of one frame given (prior mean, measurement s) pairs."""
    if len(proposals) == 0:
        raise ValueError("cannot score an empty proposal list")
    prior_means = np.array([p[0] for p in proposals], dtype=np.float64)
    ss = np.array([p[1] for p in proposals], dtype=np.float64)
    values, gates, degenerate = score_frame_values(prior_means, ss, b, w, threshold)
    return [
        FusedScore(float(values[i]), bool(gates[i]), bool(degenerate[i]))
        for i in range(len(proposals))
    ]
