"""Fringe peak detection, noise-floor statistics and peak grouping.

Peaks are local maxima of ``|value|`` in the conditioned signal, so crests and
troughs of the interference pattern are both picked up. A peak is a
candidate when it exceeds 1.5 times the mean absolute conditioned value.
Candidates close together in time form a group. A group survives if it
has at least three peaks and one of them stands at least one standard
deviation above the mean noise floor.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .condition import ConditionedSignal
from .errors import InsufficientQuietSignal

THRESHOLD_FACTOR = 1.5
# smallest group the noise estimate masks out, whatever the pruning setting
MASK_GROUP_SIZE = 3
# peaks below this fraction of the largest |value| are float round-off, not signal
RESOLUTION_FLOOR = 1e-9


class Polarity(str, enum.Enum):
    CREST = "crest"
    TROUGH = "trough"


@dataclass(frozen=True)
class Peak:
    t_ms: float
    height: float
    polarity: Polarity = Polarity.CREST


@dataclass(frozen=True)
class NoiseStats:
    mean_abs: float
    std_abs: float

    @property
    def large_peak_level(self) -> float:
        return self.mean_abs + self.std_abs


@dataclass(frozen=True)
class PeakGroup:
    peaks: tuple

    @property
    def span(self) -> tuple[float, float]:
        return (self.peaks[0].t_ms, self.peaks[-1].t_ms)

    @property
    def heights(self) -> np.ndarray:
        return np.array([p.height for p in self.peaks])

    @property
    def times_ms(self) -> np.ndarray:
        return np.array([p.t_ms for p in self.peaks])

    def __len__(self):
        return len(self.peaks)


def _quiet_mask(sig, exclusion):
    t = sig.t_ms
    mask = np.ones(len(sig), dtype=bool)
    for start, end in exclusion or ():
        mask &= ~((t >= start) & (t <= end))
    return mask


def noise_stats(sig: ConditionedSignal, exclusion=()) -> NoiseStats:
    """Mean and std of ``|value|`` outside the excluded ``(start_ms, end_ms)`` spans."""
    mask = _quiet_mask(sig, exclusion)
    quiet_ms = mask.sum() * 1000.0 / sig.rate_hz
    if quiet_ms < 1000.0:
        raise InsufficientQuietSignal(f"only {quiet_ms:.0f} ms of signal outside excluded spans")
    a = np.abs(sig.values[mask])
    return NoiseStats(float(a.mean()), float(a.std()))


def local_maxima(a: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; a flat top counts once, at its centre."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] < 3:
        return np.empty(0, dtype=np.int64)
    idx, _ = find_peaks(a)
    return idx.astype(np.int64)


def detect_peaks(sig: ConditionedSignal, stats: NoiseStats, threshold_factor: float = THRESHOLD_FACTOR) -> list[Peak]:
    """Local maxima of ``|value|`` strictly above ``threshold_factor * mean_abs``."""
    v = sig.values
    a = np.abs(v)
    if a.size == 0:
        return []
    floor = max(threshold_factor * stats.mean_abs, RESOLUTION_FLOOR * float(a.max()))
    idx = local_maxima(a)
    idx = idx[a[idx] > floor]
    t = idx * (1000.0 / sig.rate_hz)
    return [
        Peak(float(ti), float(a[i]), Polarity.CREST if v[i] >= 0 else Polarity.TROUGH)
        for ti, i in zip(t, idx)
    ]


def strongest_per_lobe(peaks, sig: ConditionedSignal) -> list[Peak]:
    """Keep only the tallest peak between consecutive zero crossings.

    A fringe lobe is one crest or trough of the conditioned signal. Noise
    riding on a slow lobe adds extra local maxima of nearly equal height;
    collapsing them leaves one height per half fringe.
    """
    if not peaks:
        return []
    v = sig.values
    lobe = np.concatenate([[0], np.cumsum(np.signbit(v[1:]) != np.signbit(v[:-1]))])
    idx = np.rint(np.array([p.t_ms for p in peaks]) * sig.rate_hz / 1000.0).astype(np.int64)
    best = {}
    for k, (i, p) in enumerate(zip(idx, peaks)):
        key = lobe[min(i, v.size - 1)]
        if key not in best or p.height > peaks[best[key]].height:
            best[key] = k
    return [peaks[k] for k in sorted(best.values())]


def _trim_weak_edges(peaks, edge_frac, noise_level=np.inf):
    """Drop leading/trailing peaks weaker than ``edge_frac`` of the strongest,
    or weaker than ``noise_level`` when that is lower."""
    if edge_frac <= 0 or not peaks:
        return peaks
    level = min(edge_frac * max(p.height for p in peaks), noise_level)
    strong = [i for i, p in enumerate(peaks) if p.height >= level]
    return peaks[strong[0] : strong[-1] + 1]


def _split_long(peaks, max_span_ms):
    if len(peaks) < 2 or peaks[-1].t_ms - peaks[0].t_ms <= max_span_ms:
        return [peaks]
    gaps = np.diff([p.t_ms for p in peaks])
    cut = int(np.argmax(gaps)) + 1
    return _split_long(peaks[:cut], max_span_ms) + _split_long(peaks[cut:], max_span_ms)


def group_peaks(
    peaks,
    stats: NoiseStats,
    group_gap_ms: float = 300.0,
    min_group_size: int = 3,
    max_span_ms: float = 4000.0,
    edge_frac: float = 0.1,
    edge_noise_factor: float | None = None,
) -> list[PeakGroup]:
    """Chain peaks closer than ``group_gap_ms`` and keep the plausible chains.

    Each chain is tightened to its first and last peak reaching
    ``edge_frac`` of its strongest peak, which detaches the noise-floor
    peaks that otherwise cling to both ends of a gesture. With
    ``edge_noise_factor`` set, peaks above that multiple of the large-peak
    level are always kept, so weak but clean fringes at the far end of a
    sweep stay in the group. Chains longer
    than ``max_span_ms`` are split at their largest internal gap. A chain
    is dropped when it has fewer than ``min_group_size`` peaks (lone
    glitches) or when none of its peaks reaches ``mean_abs + std_abs``.
    """
    peaks = list(peaks)
    if not peaks:
        return []
    chains = [[peaks[0]]]
    for prev, p in zip(peaks, peaks[1:]):
        if p.t_ms < prev.t_ms:
            raise ValueError("peaks must be time-ordered")
        if p.t_ms - prev.t_ms < group_gap_ms:
            chains[-1].append(p)
        else:
            chains.append([p])
    groups = []
    level = stats.large_peak_level
    keep = np.inf if edge_noise_factor is None else edge_noise_factor * level
    for chain in chains:
        for part in _split_long(_trim_weak_edges(chain, edge_frac, keep), max_span_ms):
            part = _trim_weak_edges(part, edge_frac, keep)
            if len(part) < min_group_size:
                continue
            if not any(p.height >= level for p in part):
                continue
            groups.append(PeakGroup(tuple(part)))
    return groups


@dataclass(frozen=True)
class PeakParams:
    threshold_factor: float = THRESHOLD_FACTOR
    group_gap_ms: float = 300.0
    min_group_size: int = 3
    max_span_ms: float = 4000.0
    edge_frac: float = 0.1
    edge_noise_factor: float | None = 4.0
    one_per_lobe: bool = True
    # margin added around candidate groups before re-estimating the noise floor
    exclusion_pad_ms: float = 300.0


def _candidates(sig, stats, params):
    peaks = detect_peaks(sig, stats, params.threshold_factor)
    return strongest_per_lobe(peaks, sig) if params.one_per_lobe else peaks


def estimate_noise(sig: ConditionedSignal, params: PeakParams = PeakParams()) -> NoiseStats:
    """Two-pass noise floor: whole-signal bootstrap, then again with the
    candidate groups found under the bootstrap masked out.

    Every chain of ``MASK_GROUP_SIZE`` or more peaks is masked, so the floor
    does not move with ``min_group_size``. Falls back to the bootstrap when
    less than a second of quiet signal remains.
    """
    boot = noise_stats(sig)
    groups = group_peaks(
        _candidates(sig, boot, params),
        boot,
        params.group_gap_ms,
        MASK_GROUP_SIZE,
        params.max_span_ms,
        params.edge_frac,
        params.edge_noise_factor,
    )
    if not groups:
        return boot
    pad = params.exclusion_pad_ms
    spans = [(g.span[0] - pad, g.span[1] + pad) for g in groups]
    try:
        return noise_stats(sig, spans)
    except InsufficientQuietSignal:
        return boot


def find_groups(sig: ConditionedSignal, params: PeakParams = PeakParams(), stats: NoiseStats | None = None):
    """Noise estimate, detection and grouping in one call. Returns ``(groups, stats)``."""
    if stats is None:
        stats = estimate_noise(sig, params)
    peaks = _candidates(sig, stats, params)
    groups = group_peaks(
        peaks,
        stats,
        params.group_gap_ms,
        params.min_group_size,
        params.max_span_ms,
        params.edge_frac,
        params.edge_noise_factor,
    )
    return groups, stats
