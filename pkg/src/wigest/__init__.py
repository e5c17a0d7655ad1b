"""Device-free gesture recognition from Wi-Fi channel amplitude."""
from .classify import Gesture, GestureEvent, classify_group, classify_trace, trend_pattern
from .condition import ConditionedSignal, SignalConditioner, condition, lowpass, normalize, resample
from .gate import GateConfig, GateMode, StartGate, apply_gate, fp_rate, is_valid_lever
from .peaks import NoiseStats, Peak, PeakGroup, PeakParams, detect_peaks, find_groups, group_peaks, noise_stats
from .recognizer import GestureRecognizer, detect_events
from .synth import GestureKind, ScriptEntry, SimConfig, synth_corpus, synth_trace
from .trace import AggregationMethod, Trace, TraceMeta, aggregate, parse_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "AggregationMethod",
    "ConditionedSignal",
    "GateConfig",
    "GateMode",
    "Gesture",
    "GestureEvent",
    "GestureKind",
    "GestureRecognizer",
    "NoiseStats",
    "Peak",
    "PeakGroup",
    "PeakParams",
    "ScriptEntry",
    "SignalConditioner",
    "SimConfig",
    "StartGate",
    "Trace",
    "TraceMeta",
    "aggregate",
    "apply_gate",
    "classify_group",
    "classify_trace",
    "condition",
    "detect_events",
    "detect_peaks",
    "find_groups",
    "fp_rate",
    "group_peaks",
    "is_valid_lever",
    "lowpass",
    "noise_stats",
    "normalize",
    "parse_trace",
    "resample",
    "synth_corpus",
    "synth_trace",
    "trend_pattern",
    "write_trace",
]
