"""Two-path Wi-Fi channel simulator used as ground truth for the pipeline.

The receiver sees the direct path plus one reflection off the user's arm at
distance ``d(t)``. For subcarrier ``k`` with wavelength ``lam_k``::

    amp_k(t) = | direct_amp + (reflect_gain / d(t)**2) * exp(1j * 2*pi * 2*d(t) / lam_k) |

plus Gaussian amplitude noise. Every packet also gets a fresh uniform phase
offset that only touches the recorded phase, never the amplitude, which is
what commodity Wi-Fi cards report.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError
from .trace import DEFAULT_CARRIER_HZ, Trace, TraceMeta

SPEED_OF_LIGHT = 299_792_458.0

# fraction of the sweep a lever backs off before its second push
LEVER_RETRACT = 0.6
AMBIENT_RANGE_M = (1.5, 3.0)
STATIONARY_STEP_M = 1e-9


class GestureKind(str, enum.Enum):
    PUSH = "push"
    PULL = "pull"
    PUNCH = "punch"
    LEVER = "lever"
    AMBIENT_WALK = "ambient_walk"
    IDLE = "idle"

    @classmethod
    def parse(cls, value) -> "GestureKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            raise ConfigError(f"unknown gesture kind {value!r}") from None


GESTURES = (GestureKind.PUSH, GestureKind.PULL, GestureKind.PUNCH, GestureKind.LEVER)


@dataclass(frozen=True)
class SimConfig:
    """Simulator geometry, RF and noise parameters.

    ``burst_gap_ms`` is ``None`` or ``(gap_length_ms, probability_per_second)``:
    each second of trace independently contains one packet-free gap of that
    length with the given probability.
    """

    carrier_hz: float = DEFAULT_CARRIER_HZ
    subcarrier_count: int = 30
    subcarrier_spacing_hz: float = 20e6 / 30
    packet_rate_pps: float = 1000.0
    burst_gap_ms: tuple[float, float] | None = None
    direct_amp: float = 1.0
    reflect_gain: float = 0.015
    noise_sigma: float = 0.0
    glitch_rate_per_s: float = 0.0
    glitch_magnitude: float = 0.0
    seed: int = 0
    record_phase: bool = True

    def __post_init__(self):
        if not self.packet_rate_pps > 0:
            raise ConfigError("packet_rate_pps must be > 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.reflect_gain < 0:
            raise ConfigError("reflect_gain must be >= 0")
        if self.carrier_hz <= 0 or self.subcarrier_count < 1:
            raise ConfigError("carrier_hz must be > 0 and subcarrier_count >= 1")
        if self.glitch_rate_per_s < 0:
            raise ConfigError("glitch_rate_per_s must be >= 0")
        if self.burst_gap_ms is not None:
            gap, prob = self.burst_gap_ms
            if gap <= 0 or not 0 <= prob <= 1:
                raise ConfigError("burst_gap_ms must be (gap > 0, probability in [0, 1])")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def subcarrier_wavelengths(self) -> np.ndarray:
        k = np.arange(self.subcarrier_count)
        return SPEED_OF_LIGHT / (self.carrier_hz + k * self.subcarrier_spacing_hz)

    def with_snr_db(self, snr_db: float) -> "SimConfig":
        """Copy with noise set so the idle per-subcarrier SNR is ``snr_db``.

        SNR is the direct-path amplitude over the amplitude-noise std, in dB.
        """
        return replace(self, noise_sigma=self.direct_amp * 10.0 ** (-snr_db / 20.0))

    def meta(self, label=None) -> TraceMeta:
        return TraceMeta(
            carrier_hz=self.carrier_hz,
            subcarrier_count=self.subcarrier_count,
            subcarrier_spacing_hz=self.subcarrier_spacing_hz,
            nominal_rate_pps=self.packet_rate_pps,
            label=label,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if d.get("burst_gap_ms") is not None:
            d["burst_gap_ms"] = tuple(d["burst_gap_ms"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown sim config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScriptEntry:
    start_s: float
    kind: GestureKind
    duration_s: float
    d_near_m: float = 0.2
    d_far_m: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "kind", GestureKind.parse(self.kind))
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be > 0")
        if not 0 < self.d_near_m < self.d_far_m:
            raise ConfigError(f"need 0 < d_near_m < d_far_m, got {self.d_near_m}, {self.d_far_m}")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s

    def label(self) -> dict:
        return {"start_s": self.start_s, "kind": self.kind.value, "duration_s": self.duration_s}


class GestureScript(tuple):
    """Time-ordered, non-overlapping sequence of :class:`ScriptEntry`."""

    def __new__(cls, entries=()):
        entries = tuple(
            e if isinstance(e, ScriptEntry) else ScriptEntry(*e) for e in entries
        )
        for a, b in zip(entries, entries[1:]):
            if b.start_s < a.end_s:
                raise ConfigError(
                    f"script entries overlap: {a.kind.value}@{a.start_s} and {b.kind.value}@{b.start_s}"
                )
        return super().__new__(cls, entries)

    @property
    def end_s(self) -> float:
        return max((e.end_s for e in self), default=0.0)

    def labels(self) -> list[dict]:
        return [e.label() for e in self]


@dataclass(frozen=True)
class ArmTrajectory:
    """Arm-to-receiver distance sampled on a uniform grid starting at 0 s."""

    t_s: np.ndarray
    d_m: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.t_s, self.d_m)

    @property
    def duration_s(self) -> float:
        return float(self.t_s[-1])


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _piecewise(t, duration_s, waypoints, weights):
    """Chain smoothstep moves between ``waypoints``; segment times ∝ ``weights``."""
    bounds = np.concatenate([[0.0], np.cumsum(weights) / np.sum(weights) * duration_s])
    d = np.full_like(t, waypoints[0], dtype=float)
    for i in range(len(weights)):
        a, b = bounds[i], bounds[i + 1]
        mask = t >= a
        u = (t[mask] - a) / (b - a)
        d[mask] = waypoints[i] + (waypoints[i + 1] - waypoints[i]) * _smoothstep(u)
    return d


def _blended_path(t, duration_s, waypoints, corner_s):
    """Constant-speed legs through ``waypoints`` with rounded reversals.

    The piecewise-linear path occupies ``[corner_s/2, T - corner_s/2]`` and is
    smoothed with a ``corner_s`` box kernel, so velocity is continuous and the
    path starts and ends at rest exactly on the first and last waypoint. The
    result is then stretched so its extremes hit the waypoint extremes again.
    """
    corner_s = min(corner_s, 0.5 * duration_s)
    w = np.asarray(waypoints, dtype=float)
    lengths = np.abs(np.diff(w))
    knots_t = corner_s / 2 + np.concatenate([[0.0], np.cumsum(lengths)]) / lengths.sum() * (duration_s - corner_s)
    dt = t[1] - t[0]
    half = max(1, int(round(corner_s / dt / 2)))
    pad_t = np.concatenate([t[0] - dt * np.arange(half, 0, -1), t, t[-1] + dt * np.arange(1, half + 1)])
    path = np.interp(pad_t, knots_t, w)
    kernel = np.ones(2 * half + 1) / (2 * half + 1)
    d = np.convolve(path, kernel, mode="valid")
    lo, hi = w.min(), w.max()
    dmin, dmax = d.min(), d.max()
    if dmax > dmin:
        d = lo + (d - dmin) * (hi - lo) / (dmax - dmin)
    d[0], d[-1] = w[0], w[-1]
    return d


def _ambient_walk(n, dt, rng, lo, hi, speed_std=0.5, tau_s=1.0):
    """Bounded random walk: OU-process radial velocity, position folded into [lo, hi]."""
    a = math.exp(-dt / tau_s)
    drive = rng.standard_normal(n) * speed_std * math.sqrt(1.0 - a * a)
    v0 = rng.standard_normal() * speed_std
    v = lfilter([1.0], [1.0, -a], drive, zi=[a * v0])[0]
    span = hi - lo
    p = rng.uniform(0.0, span) + np.concatenate([[0.0], np.cumsum(v[:-1]) * dt])
    # reflect off the walls: triangle-wave fold keeps the path continuous
    p = np.mod(p, 2.0 * span)
    return lo + span - np.abs(p - span)


def trajectory(kind, duration_s, d_near_m=0.2, d_far_m=0.6, samples_per_s=1000.0, rng=None, corner_s=0.05):
    """Sample the arm distance over one gesture window.

    Push/pull are single smoothstep moves. Punch goes in and back out in two
    equal halves. Lever goes forward, backs off ``LEVER_RETRACT`` of the
    sweep, then forward again, which makes the fringe strength rise, fall and rise. Punch and lever
    move at constant speed and reverse within ``corner_s``; a smoothstep
    per leg would stall the arm exactly where its reflection is strongest.
    ``rng`` is only used by the ambient walk.
    """
    kind = GestureKind.parse(kind)
    if not duration_s > 0:
        raise ConfigError("duration_s must be > 0")
    if not 0 < d_near_m < d_far_m:
        raise ConfigError(f"need 0 < d_near_m < d_far_m, got {d_near_m}, {d_far_m}")
    n = max(2, int(round(duration_s * samples_per_s)) + 1)
    t = np.linspace(0.0, duration_s, n)
    near, far = d_near_m, d_far_m
    mid = near + LEVER_RETRACT * (far - near)
    if kind is GestureKind.PUSH:
        d = _piecewise(t, duration_s, [far, near], [1.0])
    elif kind is GestureKind.PULL:
        d = _piecewise(t, duration_s, [near, far], [1.0])
    elif kind is GestureKind.PUNCH:
        d = _blended_path(t, duration_s, [far, near, far], corner_s)
    elif kind is GestureKind.LEVER:
        d = _blended_path(t, duration_s, [far, near, mid, near], corner_s)
    elif kind is GestureKind.IDLE:
        d = np.full(n, far)
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        d = _ambient_walk(n, t[1] - t[0], rng, *AMBIENT_RANGE_M)
    return ArmTrajectory(t, d)


def expected_fringe_count(traj: ArmTrajectory, wavelength_m: float) -> int:
    """Count interference extrema the trajectory should produce.

    Each monotone stretch of ``d`` contributes one extremum per half-wavelength
    step of the round-trip path ``2*d`` it crosses; each reversal of direction
    is itself an extremum of the received amplitude and adds one.
    """
    d = np.asarray(traj.d_m, dtype=float)
    if d.size < 2:
        return 0
    step = np.diff(d)
    # float round-off on stationary stretches is not motion
    moving = np.flatnonzero(np.abs(step) > STATIONARY_STEP_M)
    if moving.size == 0:
        return 0
    signs = np.sign(step[moving])
    # boundaries between monotone segments (indices into d)
    turns = moving[1:][signs[1:] != signs[:-1]]
    knots = np.concatenate([[moving[0]], turns, [moving[-1] + 1]])
    half = wavelength_m / 2.0
    grid = np.floor(2.0 * d[knots] / half)
    return int(np.sum(np.abs(np.diff(grid))) + turns.size)


def _packet_times_us(duration_s, rate_pps, burst_gap_ms, rng):
    horizon_us = int(round(duration_s * 1e6))
    chunks = []
    t = 0
    expected = int(duration_s * rate_pps * 1.05) + 16
    while True:
        gaps = np.maximum(1, np.rint(rng.exponential(1e6 / rate_pps, expected)).astype(np.int64))
        times = t + np.concatenate([[0], np.cumsum(gaps)[:-1]])
        chunks.append(times[times <= horizon_us])
        if times[-1] + gaps[-1] > horizon_us:
            break
        t = int(times[-1] + gaps[-1])
    times = np.concatenate(chunks)
    if burst_gap_ms is not None:
        gap_us = burst_gap_ms[0] * 1e3
        n_sec = int(math.ceil(duration_s))
        hit = rng.random(n_sec) < burst_gap_ms[1]
        starts = (np.arange(n_sec) + rng.random(n_sec)) * 1e6
        keep = np.ones(times.size, dtype=bool)
        for s in starts[hit]:
            keep &= ~((times >= s) & (times < s + gap_us))
        keep[0] = True
        times = times[keep]
    return times


def _distance_at(times_s, script, samples_per_s, rng):
    """Arm distance at each packet time; holds still between script entries."""
    d = np.full(times_s.shape, np.nan)
    if not script:
        return d
    first = script[0]
    trajs = [
        trajectory(e.kind, e.duration_s, e.d_near_m, e.d_far_m, samples_per_s, rng)
        for e in script
    ]
    d[times_s < first.start_s] = trajs[0].d_m[0]
    for i, (e, tr) in enumerate(zip(script, trajs)):
        inside = (times_s >= e.start_s) & (times_s <= e.end_s)
        d[inside] = tr(times_s[inside] - e.start_s)
        nxt = script[i + 1].start_s if i + 1 < len(script) else np.inf
        after = (times_s > e.end_s) & (times_s < nxt)
        d[after] = tr.d_m[-1]
    return d


def synth_trace(cfg: SimConfig, script, duration_s=None, label=None):
    """Simulate a packet trace for ``script``.

    Returns ``(trace, labels)`` where ``labels`` is the script's list of
    ``{"start_s", "kind", "duration_s"}`` dicts. The trace runs from 0 to
    ``duration_s`` (default: end of the last entry). Identical config and
    seed give bit-identical traces.
    """
    script = script if isinstance(script, GestureScript) else GestureScript(script)
    total = script.end_s if duration_s is None else float(duration_s)
    if total <= 0:
        raise ConfigError("trace duration must be > 0")

    ss = np.random.SeedSequence(cfg.seed)
    rng_pkt, rng_walk, rng_noise, rng_phase, rng_glitch = (
        np.random.default_rng(s) for s in ss.spawn(5)
    )
    t_us = _packet_times_us(total, cfg.packet_rate_pps, cfg.burst_gap_ms, rng_pkt)
    n = t_us.size
    d = _distance_at(t_us / 1e6, script, 1000.0, rng_walk)

    lam = cfg.subcarrier_wavelengths()
    k = lam.size
    amp = np.empty((n, k))
    phase = np.empty((n, k)) if cfg.record_phase else None
    chunk = max(1, 2_000_000 // k)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        dd = d[lo:hi, None]
        path_phase = 2.0 * np.pi * 2.0 * dd / lam[None, :]
        gain = np.where(np.isnan(dd), 0.0, cfg.reflect_gain / np.square(dd))
        refl = gain * np.exp(1j * np.where(np.isnan(dd), 0.0, path_phase))
        amp[lo:hi] = np.abs(cfg.direct_amp + refl)
        if cfg.noise_sigma > 0:
            amp[lo:hi] += rng_noise.normal(0.0, cfg.noise_sigma, (hi - lo, k))
        if phase is not None:
            theta = rng_phase.uniform(0.0, 2.0 * np.pi, (hi - lo, 1))
            phase[lo:hi] = np.mod(np.where(np.isnan(dd), 0.0, path_phase) + theta, 2.0 * np.pi)

    if cfg.glitch_rate_per_s > 0 and n:
        n_glitch = rng_glitch.poisson(cfg.glitch_rate_per_s * total)
        idx = rng_glitch.integers(0, n, n_glitch)
        amp[idx] += cfg.glitch_magnitude
    np.maximum(amp, 0.0, out=amp)
    if phase is not None:
        # mod can round up to exactly 2*pi
        phase[phase >= 2.0 * np.pi] = 0.0

    rssi = 20.0 * np.log10(np.maximum(amp.mean(axis=1), 1e-12))
    trace = Trace(cfg.meta(label), t_us, rssi, amp, phase)
    return trace, script.labels()


@dataclass(frozen=True)
class CorpusConfig:
    """Geometry jitter and timing for per-gesture corpora.

    Each gesture's duration is its path length over a mean arm speed drawn
    from ``speed_range_m_s``. At these speeds the fringes land at 3-5 Hz,
    inside the band the conditioning filters pass almost unchanged. Long
    paths speed up so no gesture outlasts ``max_duration_s``, which stays
    under the 4 s span at which peak groups get split.
    """

    d_near_range_m: tuple[float, float] = (0.15, 0.25)
    sweep_range_m: tuple[float, float] = (0.3, 0.4)
    speed_range_m_s: tuple[float, float] = (0.2, 0.28)
    max_duration_s: float = 3.5
    padding_s: float = 3.0

    def __post_init__(self):
        lo, hi = self.speed_range_m_s
        if not 0 < lo <= hi:
            raise ConfigError("speed_range_m_s must satisfy 0 < min <= max")
        if not self.max_duration_s > 0:
            raise ConfigError("max_duration_s must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown corpus config keys: {sorted(unknown)}")
        for key in ("d_near_range_m", "sweep_range_m", "speed_range_m_s"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def path_length_m(kind, d_near_m, d_far_m) -> float:
    """Total arm travel of a scripted gesture."""
    kind = GestureKind.parse(kind)
    sweep = d_far_m - d_near_m
    if kind in (GestureKind.PUSH, GestureKind.PULL):
        return sweep
    if kind is GestureKind.PUNCH:
        return 2.0 * sweep
    if kind is GestureKind.LEVER:
        return sweep * (1.0 + 2.0 * LEVER_RETRACT)
    raise ConfigError(f"{kind.value} has no scripted path")


@dataclass
class CorpusItem:
    trace: Trace
    labels: list
    kind: GestureKind
    entry: ScriptEntry


def random_entry(kind, rng, corpus: CorpusConfig = CorpusConfig(), start_s=None) -> ScriptEntry:
    kind = GestureKind.parse(kind)
    near = rng.uniform(*corpus.d_near_range_m)
    far = near + rng.uniform(*corpus.sweep_range_m)
    duration = min(path_length_m(kind, near, far) / rng.uniform(*corpus.speed_range_m_s), corpus.max_duration_s)
    start = corpus.padding_s if start_s is None else start_s
    return ScriptEntry(round(start, 6), kind, round(duration, 6), round(near, 6), round(far, 6))


def synth_corpus(cfg: SimConfig, n_per_gesture: int, seed: int, corpus: CorpusConfig = CorpusConfig(), kinds=GESTURES):
    """``n_per_gesture`` single-gesture traces for each kind, padded with idle time."""
    if n_per_gesture < 1:
        raise ConfigError("n_per_gesture must be >= 1")
    rng = np.random.default_rng(seed)
    items = []
    for kind in kinds:
        kind = GestureKind.parse(kind)
        for i in range(n_per_gesture):
            entry = random_entry(kind, rng, corpus)
            trace_seed = int(rng.integers(0, 2**63 - 1))
            trace, labels = synth_trace(
                replace(cfg, seed=trace_seed),
                GestureScript([entry]),
                duration_s=entry.end_s + corpus.padding_s,
                label=f"{kind.value}-{i:03d}",
            )
            items.append(CorpusItem(trace, labels, kind, entry))
    return items
