"""Trace-to-events pipeline and its scikit-learn style estimator."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .classify import Gesture, classify_trace
from .condition import (
    DEFAULT_MAX_GAP_MS,
    DEFAULT_RATE_HZ,
    DEFAULT_WINDOW_MS,
    condition_segments,
)
from .errors import ConfigError, InsufficientQuietSignal
from .gate import GateConfig, apply_gate
from .peaks import PeakParams
from .trace import AggregationMethod, MeanSubcarrier, Trace


def detect_events(
    trace: Trace,
    agg: AggregationMethod = MeanSubcarrier,
    rate_hz: float = DEFAULT_RATE_HZ,
    window_ms: float = DEFAULT_WINDOW_MS,
    max_gap_ms: float = DEFAULT_MAX_GAP_MS,
    params: PeakParams = PeakParams(),
    hysteresis_frac: float = 0.2,
):
    """Classified events for a whole trace, in trace time.

    The trace is cut at packet gaps longer than ``max_gap_ms`` and each
    piece runs through the pipeline on its own. Pieces too short to give a
    noise estimate produce no events.
    """
    events = []
    for sig in condition_segments(trace, agg, rate_hz, window_ms, max_gap_ms):
        try:
            events.extend(classify_trace(sig, params, hysteresis_frac))
        except InsufficientQuietSignal:
            continue
    events.sort(key=lambda e: (e.start_ms, e.end_ms))
    return events


def _as_traces(X):
    if isinstance(X, Trace):
        return [X]
    try:
        traces = list(X)
    except TypeError:
        raise TypeError(f"expected a Trace or an iterable of Trace, got {type(X).__name__}") from None
    for t in traces:
        if not isinstance(t, Trace):
            raise TypeError(f"expected Trace items, got {type(t).__name__}")
    return traces


class GestureRecognizer(BaseEstimator):
    """End-to-end gesture recognizer over raw traces.

    The pipeline has no learned state: ``fit`` validates and freezes the
    parameters. ``predict_events`` returns the (optionally gated) event list
    of every trace. ``predict`` reduces each trace to one label, that of its
    strongest event, or ``"unknown"`` when there is none.

    Parameters mirror the pipeline stages: aggregation and conditioning
    (``agg``, ``rate_hz``, ``window_ms``, ``max_gap_ms``), peak grouping
    (the :class:`~wigest.peaks.PeakParams` fields), trend extraction (``hysteresis_frac``) and the start
    gate (``gate``: a mode name or a :class:`GateConfig`).
    """

    def __init__(
        self,
        agg="mean",
        rate_hz=DEFAULT_RATE_HZ,
        window_ms=DEFAULT_WINDOW_MS,
        max_gap_ms=DEFAULT_MAX_GAP_MS,
        threshold_factor=1.5,
        group_gap_ms=300.0,
        min_group_size=3,
        max_span_ms=4000.0,
        edge_frac=0.1,
        edge_noise_factor=4.0,
        one_per_lobe=True,
        exclusion_pad_ms=300.0,
        hysteresis_frac=0.2,
        gate="none",
    ):
        self.agg = agg
        self.rate_hz = rate_hz
        self.window_ms = window_ms
        self.max_gap_ms = max_gap_ms
        self.threshold_factor = threshold_factor
        self.group_gap_ms = group_gap_ms
        self.min_group_size = min_group_size
        self.max_span_ms = max_span_ms
        self.edge_frac = edge_frac
        self.edge_noise_factor = edge_noise_factor
        self.one_per_lobe = one_per_lobe
        self.exclusion_pad_ms = exclusion_pad_ms
        self.hysteresis_frac = hysteresis_frac
        self.gate = gate

    def _validate(self):
        if not self.rate_hz > 0 or not self.window_ms > 0:
            raise ConfigError("rate_hz and window_ms must be > 0")
        if self.max_gap_ms is not None and not self.max_gap_ms > 0:
            raise ConfigError("max_gap_ms must be > 0")
        if not self.threshold_factor > 0:
            raise ConfigError("threshold_factor must be > 0")
        if not self.group_gap_ms > 0 or not self.max_span_ms > 0:
            raise ConfigError("group_gap_ms and max_span_ms must be > 0")
        if int(self.min_group_size) < 3:
            raise ConfigError("min_group_size must be >= 3")
        if not 0 <= self.edge_frac < 1 or self.exclusion_pad_ms < 0:
            raise ConfigError("edge_frac must be in [0, 1) and exclusion_pad_ms >= 0")
        if self.edge_noise_factor is not None and not self.edge_noise_factor > 0:
            raise ConfigError("edge_noise_factor must be > 0 or None")
        if not 0 <= self.hysteresis_frac < 1:
            raise ConfigError("hysteresis_frac must be in [0, 1)")
        agg = self.agg if isinstance(self.agg, AggregationMethod) else AggregationMethod.parse(self.agg)
        gate = self.gate if isinstance(self.gate, GateConfig) else GateConfig(mode=self.gate)
        params = PeakParams(
            threshold_factor=float(self.threshold_factor),
            group_gap_ms=float(self.group_gap_ms),
            min_group_size=int(self.min_group_size),
            max_span_ms=float(self.max_span_ms),
            edge_frac=float(self.edge_frac),
            edge_noise_factor=None if self.edge_noise_factor is None else float(self.edge_noise_factor),
            one_per_lobe=bool(self.one_per_lobe),
            exclusion_pad_ms=float(self.exclusion_pad_ms),
        )
        return agg, params, gate

    def fit(self, X=None, y=None):
        self.agg_, self.peak_params_, self.gate_config_ = self._validate()
        self.classes_ = np.array([g.value for g in Gesture])
        return self

    def _events(self, trace):
        return detect_events(
            trace,
            self.agg_,
            self.rate_hz,
            self.window_ms,
            self.max_gap_ms,
            self.peak_params_,
            self.hysteresis_frac,
        )

    def predict_events(self, X):
        check_is_fitted(self, "peak_params_")
        return [apply_gate(self._events(t), self.gate_config_) for t in _as_traces(X)]

    def predict(self, X):
        labels = []
        for events in self.predict_events(X):
            if events:
                labels.append(max(events, key=lambda e: e.max_height).gesture.value)
            else:
                labels.append(Gesture.UNKNOWN.value)
        return np.array(labels, dtype=object)

    def score(self, X, y):
        """Fraction of traces whose predicted label equals ``y``."""
        y = np.array([getattr(v, "value", v) for v in y], dtype=object)
        pred = self.predict(X)
        if pred.shape != y.shape:
            raise ValueError(f"got {pred.shape[0]} traces but {y.shape[0]} labels")
        return float(np.mean(pred == y))

    def with_gate(self, mode) -> "GestureRecognizer":
        """Fitted copy using another gate mode."""
        gate = replace(self.gate_config_, mode=mode) if hasattr(self, "gate_config_") else mode
        return clone(self).set_params(gate=gate).fit()
