"""Start-gesture gate and false-positive rate.

Events are only reported after the user performs a start sequence: one
lever (``single``) or two levers in quick succession (``double``). A lever
only counts when its fringe peaks are evenly spaced, which random motion
rarely manages, and it must stand well clear of the noise floor, since
arm-length motion reflects far more strongly than people moving about the
room. Once armed, the gate locks again after ``idle_timeout_s``
without events.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .classify import Gesture, GestureEvent
from .errors import ConfigError, OutOfOrderEvent, ZeroDuration


class GateMode(str, enum.Enum):
    NONE = "none"
    SINGLE = "single"
    DOUBLE = "double"

    @classmethod
    def parse(cls, value) -> "GateMode":
        if isinstance(value, cls):
            return value
        if value is None:
            return cls.NONE
        aliases = {"singlelever": "single", "doublelever": "double", "off": "none"}
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown gate mode {value!r}") from None


@dataclass(frozen=True)
class GateConfig:
    mode: GateMode = GateMode.NONE
    double_window_s: float = 4.0
    idle_timeout_s: float = 30.0
    lever_period_ms_range: tuple[float, float] = (50.0, 500.0)
    lever_period_cv_max: float = 0.4
    # minimum GestureEvent.prominence (peak height over the noise floor)
    lever_min_prominence: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "mode", GateMode.parse(self.mode))
        lo, hi = self.lever_period_ms_range
        if not lo < hi:
            raise ConfigError("lever_period_ms_range needs min < max")
        if self.lever_min_prominence < 0:
            raise ConfigError("lever_min_prominence must be >= 0")
        if not self.lever_period_cv_max > 0:
            raise ConfigError("lever_period_cv_max must be > 0")
        if self.double_window_s <= 0 or self.idle_timeout_s <= 0:
            raise ConfigError("gate windows must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "GateConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown gate config keys: {sorted(unknown)}")
        if "lever_period_ms_range" in d:
            d["lever_period_ms_range"] = tuple(d["lever_period_ms_range"])
        return cls(**d)


@dataclass(frozen=True)
class Locked:
    pass


@dataclass(frozen=True)
class HalfArmed:
    first_lever_ms: float


@dataclass(frozen=True)
class Armed:
    last_activity_ms: float


LOCKED = Locked()


def lever_periodicity(times_ms) -> tuple[float, float]:
    """Mean and coefficient of variation of the inter-peak intervals."""
    gaps = np.diff(np.asarray(times_ms, dtype=float))
    if gaps.size == 0:
        return float("nan"), float("nan")
    mean = float(gaps.mean())
    return mean, float(gaps.std() / mean) if mean > 0 else float("inf")


def is_valid_lever(e: GestureEvent, cfg: GateConfig, group=None) -> bool:
    """Lever label, evenly spaced peaks at a plausible period, and a peak
    height at least ``lever_min_prominence`` times the noise floor.

    Peak times come from ``group`` when given, else from the event itself.
    """
    if e.gesture is not Gesture.LEVER or e.prominence < cfg.lever_min_prominence:
        return False
    times = group.times_ms if group is not None else e.peak_times_ms
    mean, cv = lever_periodicity(times)
    lo, hi = cfg.lever_period_ms_range
    return bool(lo <= mean <= hi and cv <= cfg.lever_period_cv_max)


def step(state, e: GestureEvent, cfg: GateConfig):
    """One transition. Returns ``(new_state, emitted_event_or_None)``.

    An event that arrives after a window has lapsed only moves the gate back
    to ``Locked``; it is not reconsidered as a start gesture.
    """
    if cfg.mode is GateMode.NONE:
        return state, e
    if isinstance(state, Armed):
        if e.start_ms - state.last_activity_ms > cfg.idle_timeout_s * 1000.0:
            return LOCKED, None
        return Armed(max(state.last_activity_ms, e.end_ms)), e
    if isinstance(state, HalfArmed):
        if e.start_ms - state.first_lever_ms > cfg.double_window_s * 1000.0:
            return LOCKED, None
        if is_valid_lever(e, cfg):
            return Armed(e.end_ms), None
        return state, None
    if is_valid_lever(e, cfg):
        if cfg.mode is GateMode.SINGLE:
            return Armed(e.end_ms), None
        return HalfArmed(e.end_ms), None
    return state, None


class StartGate:
    """Stateful wrapper around :func:`step` for one event stream."""

    def __init__(self, cfg: GateConfig = GateConfig()):
        self.cfg = cfg
        self.state = LOCKED
        self._last_start = -np.inf

    def feed(self, e: GestureEvent):
        if e.start_ms < self._last_start:
            raise OutOfOrderEvent(f"event at {e.start_ms} ms after one at {self._last_start} ms")
        self._last_start = e.start_ms
        self.state, out = step(self.state, e, self.cfg)
        return out

    def run(self, events) -> list[GestureEvent]:
        return [out for out in map(self.feed, events) if out is not None]


def apply_gate(events, cfg: GateConfig = GateConfig()) -> list[GestureEvent]:
    """Events that pass the gate, starting from ``Locked``."""
    return StartGate(cfg).run(events)


def fp_rate(events, trace_minutes: float) -> float:
    """Emitted events per minute of gesture-free trace."""
    if not trace_minutes > 0:
        raise ZeroDuration("trace duration must be > 0 minutes")
    return len(list(events)) / float(trace_minutes)
