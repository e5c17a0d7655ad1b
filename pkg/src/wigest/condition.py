"""Signal conditioning: uniform resampling, moving-average low-pass, and
local zero-normalization.

The low-pass is an equal-coefficient FIR with ``rate_hz / 10`` taps (100 taps,
i.e. 100 ms, at 1 kHz), centred so peaks stay aligned with gesture time.
Normalization subtracts a centred 300 ms moving mean. Both shorten their
window at the signal edges instead of padding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import GapTooLarge, SignalTooShort, TooFewPoints
from .trace import AggregationMethod, MeanSubcarrier, Series, Trace, aggregate

DEFAULT_RATE_HZ = 1000.0
DEFAULT_MAX_GAP_MS = 500.0
DEFAULT_WINDOW_MS = 300.0


@dataclass(frozen=True)
class UniformSignal:
    rate_hz: float
    t0_us: int
    values: np.ndarray

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ValueError("rate_hz must be > 0")
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError("signal values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return int(self.values.shape[0])

    @property
    def t_ms(self) -> np.ndarray:
        """Sample times in ms from the signal start."""
        return np.arange(len(self)) * (1000.0 / self.rate_hz)

    @property
    def duration_ms(self) -> float:
        return len(self) * 1000.0 / self.rate_hz

    def with_values(self, values):
        return type(self)(self.rate_hz, self.t0_us, values)


class ConditionedSignal(UniformSignal):
    """Filtered and locally zero-normalized :class:`UniformSignal`."""


def split_at_gaps(series: Series, max_gap_ms: float = DEFAULT_MAX_GAP_MS) -> list[Series]:
    """Cut a series wherever consecutive packets are more than ``max_gap_ms`` apart."""
    t, v = series
    if t.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(t) > max_gap_ms * 1000.0) + 1
    return [Series(tt, vv) for tt, vv in zip(np.split(t, cuts), np.split(v, cuts))]


def resample(series: Series, rate_hz: float = DEFAULT_RATE_HZ, max_gap_ms: float = DEFAULT_MAX_GAP_MS) -> UniformSignal:
    """Linearly interpolate onto a uniform grid starting at the first timestamp."""
    t_us, values = series
    t_us = np.asarray(t_us, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if t_us.size < 2:
        raise TooFewPoints(f"need at least 2 points to resample, got {t_us.size}")
    gaps = np.diff(t_us)
    if np.any(gaps <= 0):
        raise ValueError("timestamps must be strictly increasing")
    if max_gap_ms is not None:
        big = np.flatnonzero(gaps > max_gap_ms * 1000.0)
        if big.size:
            i = big[0]
            raise GapTooLarge(t_us[i], gaps[i])
    t0 = int(t_us[0])
    span_us = int(t_us[-1] - t0)
    step_us = 1e6 / rate_hz
    n = int(np.floor(span_us / step_us + 1e-9)) + 1
    grid = np.arange(n) * step_us
    out = np.interp(grid, (t_us - t0).astype(np.float64), values)
    return UniformSignal(rate_hz, t0, out)


def _moving_mean(x, before, after):
    """Mean of ``x[i-before : i+after+1]``, clipped to the signal at the edges.

    Works on deviations from ``x[0]`` so a constant input is returned exactly.
    """
    n = x.shape[0]
    ref = x[0]
    csum = np.concatenate([[0.0], np.cumsum(x - ref)])
    idx = np.arange(n)
    lo = np.maximum(idx - before, 0)
    hi = np.minimum(idx + after + 1, n)
    return ref + (csum[hi] - csum[lo]) / (hi - lo)


def lowpass_taps(rate_hz: float) -> int:
    return max(1, int(round(rate_hz / 10.0)))


def lowpass(sig: UniformSignal) -> UniformSignal:
    """Equal-coefficient FIR, ``rate_hz/10`` taps, group delay removed."""
    n_taps = lowpass_taps(sig.rate_hz)
    if len(sig) < n_taps:
        raise SignalTooShort(f"signal has {len(sig)} samples, low-pass needs {n_taps}")
    before = (n_taps - 1) // 2
    return sig.with_values(_moving_mean(sig.values, before, n_taps - 1 - before))


def normalize(sig: UniformSignal, window_ms: float = DEFAULT_WINDOW_MS) -> ConditionedSignal:
    """Subtract a centred moving mean of ``window_ms``.

    The window reaches ``window_ms/2`` to either side (an odd sample count),
    so it is exactly symmetric and a straight line normalizes to zero.
    """
    width = max(1, int(round(window_ms * sig.rate_hz / 1000.0)))
    if len(sig) <= width:
        raise SignalTooShort(f"signal has {len(sig)} samples, normalization window is {width}")
    half = width // 2
    mean = _moving_mean(sig.values, half, half)
    return ConditionedSignal(sig.rate_hz, sig.t0_us, sig.values - mean)


def condition(
    t: Trace,
    m: AggregationMethod = MeanSubcarrier,
    rate_hz: float = DEFAULT_RATE_HZ,
    window_ms: float = DEFAULT_WINDOW_MS,
    max_gap_ms: float = DEFAULT_MAX_GAP_MS,
) -> ConditionedSignal:
    """aggregate -> resample -> lowpass -> normalize."""
    if len(t) < 2:
        raise TooFewPoints(f"need at least 2 packets, got {len(t)}")
    series = aggregate(t, m)
    return normalize(lowpass(resample(series, rate_hz, max_gap_ms)), window_ms)


def condition_segments(
    t: Trace,
    m: AggregationMethod = MeanSubcarrier,
    rate_hz: float = DEFAULT_RATE_HZ,
    window_ms: float = DEFAULT_WINDOW_MS,
    max_gap_ms: float = DEFAULT_MAX_GAP_MS,
) -> list[ConditionedSignal]:
    """Like :func:`condition`, but splits at oversized gaps and skips pieces
    too short to filter."""
    if len(t) < 2:
        raise TooFewPoints(f"need at least 2 packets, got {len(t)}")
    out = []
    min_len = max(lowpass_taps(rate_hz), int(round(window_ms * rate_hz / 1000.0)) + 1)
    for piece in split_at_gaps(aggregate(t, m), max_gap_ms):
        if piece.t_us.size < 2:
            continue
        sig = resample(piece, rate_hz, max_gap_ms)
        if len(sig) < min_len:
            continue
        out.append(normalize(lowpass(sig), window_ms))
    return out


class SignalConditioner(TransformerMixin, BaseEstimator):
    """Turn raw traces into conditioned amplitude streams.

    Stateless: ``fit`` only validates parameters. ``transform`` maps a list of
    :class:`~wigest.trace.Trace` to a list of lists of
    :class:`ConditionedSignal` (one per gap-free segment).
    """

    def __init__(self, agg="mean", rate_hz=DEFAULT_RATE_HZ, window_ms=DEFAULT_WINDOW_MS, max_gap_ms=DEFAULT_MAX_GAP_MS):
        self.agg = agg
        self.rate_hz = rate_hz
        self.window_ms = window_ms
        self.max_gap_ms = max_gap_ms

    def _method(self):
        if isinstance(self.agg, AggregationMethod):
            return self.agg
        return AggregationMethod.parse(self.agg)

    def fit(self, X, y=None):
        self._method()
        if not self.rate_hz > 0 or not self.window_ms > 0:
            raise ValueError("rate_hz and window_ms must be > 0")
        self.method_ = self._method()
        return self

    def transform(self, X):
        method = getattr(self, "method_", None) or self._method()
        return [
            condition_segments(t, method, self.rate_hz, self.window_ms, self.max_gap_ms)
            for t in _as_trace_list(X)
        ]


def _as_trace_list(X):
    if isinstance(X, Trace):
        return [X]
    return list(X)
