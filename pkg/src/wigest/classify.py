"""Gesture classification from the rise and fall of fringe peak heights.

Motion toward the receiver strengthens the reflection, so a push gives
rising peaks and a pull gives falling ones. A punch rises then falls. A
lever rises, falls and rises again. Anything else is ``Unknown``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .condition import ConditionedSignal
from .errors import TooFewPeaks
from .peaks import NoiseStats, PeakGroup, PeakParams, find_groups


class Gesture(str, enum.Enum):
    PUSH = "push"
    PULL = "pull"
    PUNCH = "punch"
    LEVER = "lever"
    UNKNOWN = "unknown"


class Trend(str, enum.Enum):
    UP = "up"
    DOWN = "down"


UP, DOWN = Trend.UP, Trend.DOWN

PATTERNS = {
    (UP,): Gesture.PUSH,
    (DOWN,): Gesture.PULL,
    (UP, DOWN): Gesture.PUNCH,
    (UP, DOWN, UP): Gesture.LEVER,
}


@dataclass(frozen=True)
class GestureEvent:
    gesture: Gesture
    start_ms: float
    end_ms: float
    peak_count: int
    pattern: tuple = ()
    max_height: float = 0.0
    # peak times of the source group, kept for the start-gesture periodicity check
    peak_times_ms: tuple = field(default=(), compare=False, repr=False)
    # max_height over the noise floor's large-peak level; inf when unknown
    prominence: float = field(default=float("inf"), compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            "gesture": self.gesture.value,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "peak_count": self.peak_count,
            "max_height": self.max_height,
        }


def _median3(h):
    if h.size < 5:
        # a 3-point median would rewrite most of a short sequence
        return h
    out = h.copy()
    out[1:-1] = np.median(np.stack([h[:-2], h[1:-1], h[2:]]), axis=0)
    return out


def trend_pattern(heights, hysteresis_frac: float = 0.2, edge_trim: int = 2) -> tuple:
    """Sequence of significant rises and falls in ``heights``.

    Long sequences first lose ``edge_trim`` heights at each end: fringes
    where the arm starts or stops are slow, and the conditioning filters
    flatten them. Trimming only happens while at least five heights remain.
    Heights then get a 3-point median (sequences of five or more) and are
    split into maximal monotone runs. Runs whose total change is under
    ``hysteresis_frac`` of the largest height are dropped, and neighbours
    that then share a direction are merged.
    """
    h = np.asarray(heights, dtype=float)
    if h.size < 3:
        raise TooFewPeaks(f"need at least 3 heights, got {h.size}")
    if edge_trim > 0 and h.size - 2 * edge_trim >= 5:
        h = h[edge_trim:-edge_trim]
    hs = _median3(h)
    diffs = np.diff(hs)
    moving = np.flatnonzero(diffs != 0)
    if moving.size == 0:
        return ()
    signs = diffs[moving] > 0
    cut = np.flatnonzero(signs[1:] != signs[:-1]) + 1
    first = moving[np.concatenate([[0], cut])]
    last = moving[np.concatenate([cut - 1, [moving.size - 1]])] + 1
    limit = hysteresis_frac * float(h.max())
    runs = []
    for a, b in zip(first, last):
        # endpoint difference, so a reversed sequence gives exactly the negated change
        change = hs[b] - hs[a]
        if abs(change) < limit:
            continue
        trend = UP if change > 0 else DOWN
        if not runs or runs[-1] is not trend:
            runs.append(trend)
    return tuple(runs)


def classify_pattern(pattern) -> Gesture:
    return PATTERNS.get(tuple(pattern), Gesture.UNKNOWN)


def classify_group(
    g: PeakGroup, hysteresis_frac: float = 0.2, offset_ms: float = 0.0, stats: NoiseStats | None = None
) -> GestureEvent:
    heights = g.heights
    pattern = trend_pattern(heights, hysteresis_frac)
    start, end = g.span
    top = float(heights.max())
    level = stats.large_peak_level if stats is not None else 0.0
    prominence = top / level if level > 0 else float("inf")
    return GestureEvent(
        gesture=classify_pattern(pattern),
        start_ms=start + offset_ms,
        end_ms=end + offset_ms,
        peak_count=len(g),
        pattern=pattern,
        max_height=top,
        peak_times_ms=tuple(float(t) + offset_ms for t in g.times_ms),
        prominence=prominence,
    )


def classify_trace(
    sig: ConditionedSignal,
    params: PeakParams = PeakParams(),
    hysteresis_frac: float = 0.2,
    return_groups: bool = False,
):
    """Noise stats, peaks, groups, labels. Event times are in ms since the
    trace start (the signal's ``t0_us`` is added)."""
    groups, stats = find_groups(sig, params)
    offset = sig.t0_us / 1000.0
    events = [classify_group(g, hysteresis_frac, offset, stats) for g in groups]
    if return_groups:
        return events, groups
    return events
