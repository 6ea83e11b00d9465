"""The l1 pseudo-distance D, softened variants D^t, and related diagnostics.

Per coordinate the distance counts quantization thresholds k*delta that
separate the two projected values; the softened count excludes (t > 0) or
widens (t < 0) a margin of size |t| around each threshold via the event
F^t(a, b) = {a > t, b <= -t} union {a < -t, b >= t}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import InvalidArgument
from .quantizer import (
    InternalConsistencyError,
    QuantizedMap,
    apply_many,
    boundary_flags,
)


def soft_count_array(a, b, t, delta: float) -> np.ndarray:
    """Number of k with F^t(a - k*delta, b - k*delta), elementwise.

    Closed form as a union of two integer intervals. The strictness pattern
    of F^t (strict on the first coordinate of each branch, nonstrict on the
    second) maps to:

      S1 = [ceil((b+t)/delta), ceil((a-t)/delta) - 1]
      S2 = [floor((a+t)/delta) + 1, floor((b-t)/delta)]

    S1 and S2 are disjoint for t >= 0 and may overlap for t < 0; the
    intersection is subtracted so each k is counted once.
    """
    if not (delta > 0):
        raise InvalidArgument("delta must be positive")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(t))):
        raise InvalidArgument("inputs must be finite")
    lo1 = np.ceil((b + t) / delta)
    hi1 = np.ceil((a - t) / delta) - 1.0
    lo2 = np.floor((a + t) / delta) + 1.0
    hi2 = np.floor((b - t) / delta)
    n1 = np.maximum(0.0, hi1 - lo1 + 1.0)
    n2 = np.maximum(0.0, hi2 - lo2 + 1.0)
    overlap = np.maximum(0.0, np.minimum(hi1, hi2) - np.maximum(lo1, lo2) + 1.0)
    return (n1 + n2 - overlap).astype(np.int64)


def soft_count_1d(a: float, b: float, t: float, delta: float) -> int:
    """Scalar soft threshold count; see soft_count_array."""
    return int(soft_count_array(np.asarray([a]), np.asarray([b]), t, delta)[0])


def soft_count_enumerated(a: float, b: float, t: float, delta: float,
                          pad: int = 2) -> int:
    """Reference count by direct enumeration of k over a covering range."""
    k_lo = math.floor(min(a, b) / delta) - pad - math.ceil(abs(t) / delta)
    k_hi = math.ceil(max(a, b) / delta) + pad + math.ceil(abs(t) / delta)
    count = 0
    for k in range(k_lo, k_hi + 1):
        ak = a - k * delta
        bk = b - k * delta
        if (ak > t and bk <= -t) or (ak < -t and bk >= t):
            count += 1
    return count


@dataclass(frozen=True)
class ThresholdCount:
    """Per-coordinate separating-threshold counts for one pair of vectors."""

    per_coordinate: np.ndarray
    t: float
    delta: float

    @property
    def value(self) -> float:
        """(delta/M) * sum of counts."""
        m = len(self.per_coordinate)
        return self.delta * float(np.sum(self.per_coordinate)) / m


@dataclass(frozen=True)
class SoftDistanceReport:
    d0: float
    dt_plus: float   # D^{|t|}
    dt_minus: float  # D^{-|t|}
    t: float
    slack_pair: np.ndarray  # per coord |d^|t|| - d^{-|t|}| - 4(delta + 2|t|)
    slack_abs: np.ndarray   # per coord worst of |d^{+-|t|} - |a-b|| - 4(delta + |t|)


def _projected_pair(qmap: QuantizedMap, x, y) -> tuple[np.ndarray, np.ndarray]:
    return qmap.project(np.asarray(x, dtype=np.float64)), qmap.project(np.asarray(y, dtype=np.float64))


def pseudo_distance(qmap: QuantizedMap, x, y) -> float:
    """D(x, y) = (delta/M) * l1 distance of the integer codes.

    Internally cross-checked against the t = 0 threshold count on every
    coordinate not flagged as sitting on a bin boundary.
    """
    xs = np.column_stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)])
    if xs.shape[0] != qmap.n:
        raise InvalidArgument(f"expected vectors of dimension {qmap.n}")
    codes = apply_many(qmap, xs)
    diff = np.abs(codes[:, 0] - codes[:, 1])
    za, zb = _projected_pair(qmap, x, y)
    counts0 = soft_count_array(za, zb, 0.0, qmap.delta)
    ok = boundary_flags(za, qmap.delta) | boundary_flags(zb, qmap.delta)
    if np.any((counts0 != diff) & ~ok):
        raise InternalConsistencyError("code distance and t=0 threshold count disagree off-boundary")
    return qmap.delta * float(np.sum(diff)) / qmap.m


def soft_pseudo_distance(qmap: QuantizedMap, x, y, t: float) -> float:
    """D^t(x, y) = (delta/M) * sum of per-coordinate soft counts."""
    za, zb = _projected_pair(qmap, x, y)
    counts = soft_count_array(za, zb, float(t), qmap.delta)
    return qmap.delta * float(np.sum(counts)) / qmap.m


def threshold_count(qmap: QuantizedMap, x, y, t: float = 0.0) -> ThresholdCount:
    za, zb = _projected_pair(qmap, x, y)
    counts = soft_count_array(za, zb, float(t), qmap.delta)
    return ThresholdCount(per_coordinate=counts, t=float(t), delta=qmap.delta)


def hyperplane_count(qmap: QuantizedMap, x, y) -> np.ndarray:
    """Per-coordinate number of separating thresholds (|code difference|)."""
    xs = np.column_stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)])
    if xs.shape[0] != qmap.n:
        raise InvalidArgument(f"expected vectors of dimension {qmap.n}")
    codes = apply_many(qmap, xs)
    return np.abs(codes[:, 0] - codes[:, 1]).astype(np.int64)


def soft_report(qmap: QuantizedMap, x, y, t: float) -> SoftDistanceReport:
    """D, D^{|t|}, D^{-|t|} plus per-coordinate slack for the local bounds."""
    za, zb = _projected_pair(qmap, x, y)
    delta = qmap.delta
    tt = abs(float(t))
    c0 = soft_count_array(za, zb, 0.0, delta)
    cp = soft_count_array(za, zb, tt, delta)
    cm = soft_count_array(za, zb, -tt, delta)
    m = qmap.m
    dp = delta * cp.astype(np.float64)
    dm = delta * cm.astype(np.float64)
    gap = np.abs(za - zb)
    slack_pair = np.abs(dp - dm) - 4.0 * (delta + 2.0 * tt)
    slack_abs = np.maximum(np.abs(dp - gap), np.abs(dm - gap)) - 4.0 * (delta + tt)
    return SoftDistanceReport(
        d0=delta * float(np.sum(c0)) / m,
        dt_plus=delta * float(np.sum(cp)) / m,
        dt_minus=delta * float(np.sum(cm)) / m,
        t=tt,
        slack_pair=slack_pair,
        slack_abs=slack_abs,
    )


def lemma1_check(a: float, b: float, t: float, s: float, delta: float):
    """(|d^t - d^s|, 4(delta+|t-s|), |d^t - |a-b||, 4(delta+|t|)).

    The caller asserts lhs <= bound for both pairs.
    """
    dt = delta * soft_count_1d(a, b, t, delta)
    ds = delta * soft_count_1d(a, b, s, delta)
    lhs_ts = abs(dt - ds)
    bound_ts = 4.0 * (delta + abs(t - s))
    lhs_abs = abs(dt - abs(a - b))
    bound_abs = 4.0 * (delta + abs(t))
    return lhs_ts, bound_ts, lhs_abs, bound_abs


class PreconditionFailed(RuntimeError):
    """A check's hypothesis does not hold; distinct from the check failing."""


def lemma3_check(qmap: QuantizedMap, x0, y0, xp, yp, t: float, eta: float, p_cap: float) -> bool:
    """Continuity of D^t under l2 perturbations.

    Requires ||Phi xp|| <= eta sqrt(M) and ||Phi yp|| <= eta sqrt(M); returns
    whether D^{t + eta sqrt(P)}(x0,y0) - 4(delta/P + eta/sqrt(P))
    <= D^t(x0+xp, y0+yp) <= D^{t - eta sqrt(P)}(x0,y0) + 4(delta/P + eta/sqrt(P)).
    """
    if p_cap < 1:
        raise InvalidArgument("p_cap must be >= 1")
    if eta <= 0:
        raise InvalidArgument("eta must be positive")
    phi = qmap.matrix.entries
    m = qmap.m
    lim = eta * math.sqrt(m) * (1.0 + 1e-12)
    if np.linalg.norm(phi @ np.asarray(xp, float)) > lim or np.linalg.norm(phi @ np.asarray(yp, float)) > lim:
        raise PreconditionFailed("projected perturbation exceeds eta*sqrt(M)")
    shift = eta * math.sqrt(p_cap)
    slack = 4.0 * (qmap.delta / p_cap + eta / math.sqrt(p_cap))
    mid = soft_pseudo_distance(qmap, np.asarray(x0, float) + np.asarray(xp, float),
                               np.asarray(y0, float) + np.asarray(yp, float), t)
    upper = soft_pseudo_distance(qmap, x0, y0, t - shift) + slack
    lower = soft_pseudo_distance(qmap, x0, y0, t + shift) - slack
    return bool(lower <= mid <= upper)
