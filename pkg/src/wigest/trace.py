"""Trace data model, JSON Lines trace format, and subcarrier aggregation.

A trace is stored column-wise (one numpy array per field) so that hour-long
captures stay cheap; :class:`RawSample` is the per-packet row view.

File layout (UTF-8, one JSON object per line)::

    {"meta": {"carrier_hz": ..., "subcarrier_count": ..., "subcarrier_spacing_hz": ...,
              "nominal_rate_pps": ..., "label": ...}}
    {"t_us": ..., "rssi_db": ..., "csi": [...], "phase": [...]}
    ...

``phase`` is optional per line. Floats are written with Python's shortest
round-trip ``repr`` so that ``parse_trace(write_trace(t)) == t`` bit for bit.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    EmptyTrace,
    MalformedLine,
    MissingMeta,
    NonMonotonicTimestamp,
    SubcarrierCountMismatch,
)

DEFAULT_CARRIER_HZ = 2.437e9  # 2.4 GHz band, channel 6


@dataclass(frozen=True)
class TraceMeta:
    carrier_hz: float = DEFAULT_CARRIER_HZ
    subcarrier_count: int = 30
    subcarrier_spacing_hz: float = 20e6 / 30
    nominal_rate_pps: float = 1000.0
    label: str | None = None

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ConfigError(f"carrier_hz must be > 0, got {self.carrier_hz}")
        if int(self.subcarrier_count) != self.subcarrier_count or self.subcarrier_count < 1:
            raise ConfigError(f"subcarrier_count must be an integer >= 1, got {self.subcarrier_count}")

    def to_json(self) -> dict:
        return {
            "carrier_hz": self.carrier_hz,
            "subcarrier_count": self.subcarrier_count,
            "subcarrier_spacing_hz": self.subcarrier_spacing_hz,
            "nominal_rate_pps": self.nominal_rate_pps,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TraceMeta":
        return cls(
            carrier_hz=float(obj["carrier_hz"]),
            subcarrier_count=int(obj["subcarrier_count"]),
            subcarrier_spacing_hz=float(obj["subcarrier_spacing_hz"]),
            nominal_rate_pps=float(obj.get("nominal_rate_pps", 0.0)),
            label=obj.get("label"),
        )


@dataclass(frozen=True)
class RawSample:
    """One received packet: timestamp, RSSI and per-subcarrier amplitude/phase."""

    t_us: int
    rssi_db: float
    csi_amp: tuple[float, ...]
    csi_phase: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.csi_amp) == 0:
            raise ValueError("csi_amp must be non-empty")
        for a in self.csi_amp:
            if not (math.isfinite(a) and a >= 0):
                raise ValueError(f"csi_amp entries must be finite and >= 0, got {a}")
        if self.csi_phase is not None and len(self.csi_phase) != len(self.csi_amp):
            raise ValueError("csi_phase length must match csi_amp")


class Trace:
    """An ordered, immutable sequence of packets plus its :class:`TraceMeta`.

    Columns:
        t_us: int64, shape (n,), strictly increasing
        rssi_db: float64, shape (n,)
        csi_amp: float64, shape (n, subcarrier_count)
        csi_phase: float64, shape (n, subcarrier_count) or None; a row of NaN
            marks a packet recorded without phase
    """

    __slots__ = ("meta", "t_us", "rssi_db", "csi_amp", "csi_phase")

    def __init__(self, meta, t_us, rssi_db, csi_amp, csi_phase=None):
        k = meta.subcarrier_count
        t_us = np.asarray(t_us, dtype=np.int64).reshape(-1)
        n = t_us.shape[0]
        rssi_db = np.asarray(rssi_db, dtype=np.float64).reshape(n)
        csi_amp = np.asarray(csi_amp, dtype=np.float64).reshape(n, k)
        if n > 1 and np.any(np.diff(t_us) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(csi_amp)) or np.any(csi_amp < 0):
            raise ValueError("csi_amp entries must be finite and >= 0")
        if csi_phase is not None:
            csi_phase = np.asarray(csi_phase, dtype=np.float64).reshape(n, k)
            if np.all(np.isnan(csi_phase)):
                csi_phase = None
        for arr in (t_us, rssi_db, csi_amp, csi_phase):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "meta", meta)
        object.__setattr__(self, "t_us", t_us)
        object.__setattr__(self, "rssi_db", rssi_db)
        object.__setattr__(self, "csi_amp", csi_amp)
        object.__setattr__(self, "csi_phase", csi_phase)

    def __setattr__(self, name, value):
        raise AttributeError("Trace is immutable")

    @classmethod
    def from_samples(cls, meta: TraceMeta, samples) -> "Trace":
        samples = list(samples)
        k = meta.subcarrier_count
        n = len(samples)
        t = np.fromiter((s.t_us for s in samples), dtype=np.int64, count=n)
        rssi = np.fromiter((s.rssi_db for s in samples), dtype=np.float64, count=n)
        amp = np.empty((n, k))
        phase = np.full((n, k), np.nan)
        for i, s in enumerate(samples):
            if len(s.csi_amp) != k:
                raise ValueError(f"sample {i} has {len(s.csi_amp)} subcarriers, expected {k}")
            amp[i] = s.csi_amp
            if s.csi_phase is not None:
                phase[i] = s.csi_phase
        return cls(meta, t, rssi, amp, phase)

    def __len__(self):
        return int(self.t_us.shape[0])

    def __getitem__(self, i) -> RawSample:
        phase = None
        if self.csi_phase is not None and not np.isnan(self.csi_phase[i, 0]):
            phase = tuple(self.csi_phase[i].tolist())
        return RawSample(
            int(self.t_us[i]), float(self.rssi_db[i]), tuple(self.csi_amp[i].tolist()), phase
        )

    def __iter__(self) -> Iterator[RawSample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def samples(self) -> list[RawSample]:
        return list(self)

    @property
    def duration_s(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(self.t_us[-1] - self.t_us[0]) / 1e6

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        if self.meta != other.meta:
            return False
        if (self.csi_phase is None) != (other.csi_phase is None):
            return False
        return (
            np.array_equal(self.t_us, other.t_us)
            and np.array_equal(self.rssi_db, other.rssi_db)
            and np.array_equal(self.csi_amp, other.csi_amp)
            and (
                self.csi_phase is None
                or np.array_equal(self.csi_phase, other.csi_phase, equal_nan=True)
            )
        )

    __hash__ = None

    def __repr__(self):
        return f"Trace(n={len(self)}, subcarriers={self.meta.subcarrier_count}, label={self.meta.label!r})"


def _line_error(exc_type, line_no, msg):
    return exc_type(msg, line_no=line_no)


def parse_trace(data) -> Trace:
    """Parse a JSON Lines trace from bytes, str, or a binary/text file object."""
    if isinstance(data, (bytes, bytearray)):
        lines = io.StringIO(data.decode("utf-8"))
    elif isinstance(data, str):
        lines = io.StringIO(data)
    else:
        lines = data

    meta = None
    t_list, rssi_list, amp_list, phase_list = [], [], [], []
    last_t = None
    any_phase = False
    for line_no, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _line_error(MalformedLine, line_no, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise _line_error(MalformedLine, line_no, "expected a JSON object")

        if meta is None:
            if "meta" not in obj:
                raise MissingMeta("first line must be a meta object", line_no=line_no)
            try:
                meta = TraceMeta.from_json(obj["meta"])
            except (KeyError, TypeError, ValueError) as exc:
                raise _line_error(MalformedLine, line_no, f"bad meta: {exc}") from None
            k = meta.subcarrier_count
            continue

        try:
            t = obj["t_us"]
            rssi = float(obj["rssi_db"])
            amp = obj["csi"]
            if isinstance(t, bool) or not isinstance(t, int):
                raise TypeError("t_us must be an integer")
            if not isinstance(amp, list):
                raise TypeError("csi must be a list")
            amp = [float(a) for a in amp]
            phase = obj.get("phase")
            if phase is not None:
                phase = [float(p) for p in phase]
        except (KeyError, TypeError, ValueError) as exc:
            raise _line_error(MalformedLine, line_no, f"bad sample: {exc}") from None

        if len(amp) != k:
            raise _line_error(
                SubcarrierCountMismatch, line_no, f"{len(amp)} amplitudes, meta says {k}"
            )
        if phase is not None and len(phase) != k:
            raise _line_error(
                SubcarrierCountMismatch, line_no, f"{len(phase)} phases, meta says {k}"
            )
        if not all(math.isfinite(a) and a >= 0 for a in amp):
            raise _line_error(MalformedLine, line_no, "amplitudes must be finite and >= 0")
        if last_t is not None and t <= last_t:
            raise _line_error(
                NonMonotonicTimestamp, line_no, f"t_us={t} does not follow {last_t}"
            )
        last_t = t
        t_list.append(t)
        rssi_list.append(rssi)
        amp_list.append(amp)
        if phase is not None:
            any_phase = True
            phase_list.append(phase)
        else:
            phase_list.append(None)

    if meta is None:
        raise MissingMeta("trace has no meta line")

    n = len(t_list)
    k = meta.subcarrier_count
    amp_arr = np.array(amp_list, dtype=np.float64).reshape(n, k)
    phase_arr = None
    if any_phase:
        phase_arr = np.full((n, k), np.nan)
        for i, p in enumerate(phase_list):
            if p is not None:
                phase_arr[i] = p
    return Trace(meta, np.array(t_list, dtype=np.int64), np.array(rssi_list), amp_arr, phase_arr)


def _fmt_floats(row) -> str:
    return "[" + ",".join(repr(x) for x in row) + "]"


def write_trace(t: Trace) -> bytes:
    """Serialize a trace to JSON Lines bytes; inverse of :func:`parse_trace`."""
    out = [json.dumps({"meta": t.meta.to_json()})]
    t_list = t.t_us.tolist()
    rssi = t.rssi_db.tolist()
    amp = t.csi_amp.tolist()
    phase = t.csi_phase.tolist() if t.csi_phase is not None else None
    for i in range(len(t_list)):
        line = f'{{"t_us":{t_list[i]},"rssi_db":{rssi[i]!r},"csi":{_fmt_floats(amp[i])}'
        if phase is not None and not math.isnan(phase[i][0]):
            line += f',"phase":{_fmt_floats(phase[i])}'
        out.append(line + "}")
    return ("\n".join(out) + "\n").encode("utf-8")


def read_trace_file(path) -> Trace:
    with open(path, "rb") as fh:
        return parse_trace(fh)


def write_trace_file(t: Trace, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_trace(t))


@dataclass(frozen=True)
class AggregationMethod:
    """How the per-subcarrier amplitudes collapse to one scalar per packet.

    ``kind`` is one of ``"mean"``, ``"sub"`` (with ``index``) or ``"rssi"``.
    """

    kind: str = "mean"
    index: int | None = None

    def __post_init__(self):
        if self.kind not in ("mean", "sub", "rssi"):
            raise ConfigError(f"unknown aggregation kind {self.kind!r}")
        if self.kind == "sub" and (self.index is None or self.index < 0):
            raise ConfigError("single-subcarrier aggregation needs a non-negative index")

    @classmethod
    def parse(cls, text: str) -> "AggregationMethod":
        """Parse ``mean``, ``rssi`` or ``sub:<k>``."""
        text = text.strip().lower()
        if text.startswith("sub:"):
            try:
                return cls("sub", int(text[4:]))
            except ValueError:
                raise ConfigError(f"bad subcarrier index in {text!r}") from None
        return cls(text)

    def __str__(self):
        return f"sub:{self.index}" if self.kind == "sub" else self.kind


MeanSubcarrier = AggregationMethod("mean")
RssiLinear = AggregationMethod("rssi")


def SingleSubcarrier(index: int) -> AggregationMethod:
    return AggregationMethod("sub", index)


class Series(NamedTuple):
    """Timestamped scalar series (``t_us`` int64, ``values`` float64)."""

    t_us: np.ndarray
    values: np.ndarray


def aggregate(t: Trace, m: AggregationMethod = MeanSubcarrier) -> Series:
    if len(t) == 0:
        raise EmptyTrace("cannot aggregate an empty trace")
    if m.kind == "mean":
        # summing in sorted order makes the mean exactly permutation invariant
        values = np.sort(t.csi_amp, axis=1).mean(axis=1)
    elif m.kind == "rssi":
        values = 10.0 ** (t.rssi_db / 20.0)
    else:
        if m.index >= t.meta.subcarrier_count:
            raise ConfigError(
                f"subcarrier index {m.index} out of range for {t.meta.subcarrier_count} subcarriers"
            )
        values = t.csi_amp[:, m.index].copy()
    return Series(t.t_us.copy(), np.asarray(values, dtype=np.float64))
