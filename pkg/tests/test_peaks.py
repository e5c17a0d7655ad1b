import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import folded_normal_mean, plateau_maxima
from wigest.condition import ConditionedSignal, condition
from wigest.errors import InsufficientQuietSignal
from wigest.peaks import (
    NoiseStats,
    Peak,
    PeakParams,
    Polarity,
    detect_peaks,
    estimate_noise,
    find_groups,
    group_peaks,
    local_maxima,
    noise_stats,
    strongest_per_lobe,
)
from wigest.synth import ScriptEntry, SimConfig, synth_trace


def csig(values, rate=1000.0, t0_us=0):
    return ConditionedSignal(rate, t0_us, np.asarray(values, dtype=float))


@pytest.fixture(scope="module")
def noisy_push(push_entry):
    cfg = SimConfig(seed=11).with_snr_db(15)
    trace, _ = synth_trace(cfg, [push_entry], duration_s=push_entry.end_s + 3.0)
    return condition(trace)


def test_noise_stats_of_zeros():
    assert noise_stats(csig(np.zeros(2000))) == NoiseStats(0.0, 0.0)


def test_noise_stats_folded_normal():
    sigma = 0.7
    x = np.random.default_rng(4).normal(0, sigma, 10_000)
    stats = noise_stats(csig(x))
    assert abs(stats.mean_abs - folded_normal_mean(sigma)) < 0.05 * folded_normal_mean(sigma)
    assert abs(stats.std_abs - sigma * np.sqrt(1 - 2 / np.pi)) < 0.05 * sigma


def test_noise_stats_exclusion_matches_idle_run(push_entry):
    # same seed: packet times and noise draws match, only the arm differs
    cfg = SimConfig(seed=12).with_snr_db(15)
    duration = push_entry.end_s + 6.0
    busy, _ = synth_trace(cfg, [push_entry], duration_s=duration)
    idle, _ = synth_trace(cfg, [], duration_s=duration)
    busy_sig, idle_sig = condition(busy), condition(idle)
    off = busy_sig.t0_us / 1000
    span = (push_entry.start_s * 1000 - 500 - off, push_entry.end_s * 1000 + 500 - off)
    got = noise_stats(busy_sig, [span])
    want = noise_stats(idle_sig)
    assert abs(got.mean_abs - want.mean_abs) < 0.1 * want.mean_abs
    assert abs(got.std_abs - want.std_abs) < 0.1 * want.std_abs
    # without the exclusion the gesture dominates
    assert noise_stats(busy_sig).mean_abs > 2 * want.mean_abs


def test_noise_stats_needs_a_quiet_second():
    with pytest.raises(InsufficientQuietSignal):
        noise_stats(csig(np.ones(999)))
    with pytest.raises(InsufficientQuietSignal):
        noise_stats(csig(np.ones(1500)), [(0.0, 600.0)])
    assert noise_stats(csig(np.ones(1500)), [(0.0, 400.0)]).mean_abs == 1.0


def test_detect_peaks_all_zero():
    assert detect_peaks(csig(np.zeros(500)), NoiseStats(0.0, 0.0)) == []


def test_detect_peaks_triangle_bump():
    x = np.zeros(400)
    x[100:201] = 10.0 * (1 - np.abs(np.arange(-50, 51)) / 50)
    peaks = detect_peaks(csig(x), NoiseStats(1.0, 0.5))
    assert peaks == [Peak(150.0, 10.0, Polarity.CREST)]


def test_detect_peaks_trough_polarity():
    x = np.zeros(300)
    x[140:161] = -np.hanning(21) * 5
    (p,) = detect_peaks(csig(x), NoiseStats(1.0, 0.0))
    assert p.polarity is Polarity.TROUGH and p.height == pytest.approx(5.0)


def test_detect_peaks_threshold_is_strict():
    x = np.array([0, 1.5, 0, 1.6, 0], dtype=float)
    peaks = detect_peaks(csig(x), NoiseStats(1.0, 0.0))
    assert [p.height for p in peaks] == [1.6]


@given(arrays(np.int8, st.integers(0, 60), elements=st.integers(-3, 3)))
def test_local_maxima_matches_loop_oracle(a):
    assert local_maxima(a.astype(float)).tolist() == plateau_maxima(a.tolist())


def test_local_maxima_plateau_centre():
    assert local_maxima(np.array([0, 1, 2, 2, 2, 1, 0, 3, 3, 0.0])).tolist() == [3, 7]
    assert local_maxima(np.array([2, 1, 2.0])).tolist() == []


@settings(max_examples=30)
@given(seed=st.integers(0, 2**31), snr=st.floats(5, 30))
def test_every_peak_clears_threshold(seed, snr):
    trace, _ = synth_trace(SimConfig(seed=seed, subcarrier_count=3).with_snr_db(snr), [], duration_s=2.5)
    s = condition(trace)
    stats = noise_stats(s)
    for p in detect_peaks(s, stats):
        assert p.height > 1.5 * stats.mean_abs
        assert 0 <= p.t_ms <= s.duration_ms


def test_noiseless_push_peak_count(clean_push, push_entry):
    from wigest.synth import expected_fringe_count, trajectory

    s = condition(clean_push[0])
    peaks = detect_peaks(s, noise_stats(s))
    off = s.t0_us / 1000
    lo, hi = push_entry.start_s * 1000 - off - 50, push_entry.end_s * 1000 - off + 50
    inside = [p for p in peaks if lo <= p.t_ms <= hi]
    expect = expected_fringe_count(trajectory("push", push_entry.duration_s), SimConfig().wavelength_m)
    assert abs(len(inside) - expect) <= 2


def test_strongest_per_lobe_keeps_tallest():
    x = np.zeros(600)
    x[100:300] = 1.0
    x[150], x[250] = 3.0, 4.0
    x[400:500] = -2.0
    x[450] = -5.0
    s = csig(x)
    peaks = [Peak(150.0, 3.0), Peak(250.0, 4.0), Peak(450.0, 5.0, Polarity.TROUGH)]
    assert strongest_per_lobe(peaks, s) == peaks[1:]
    assert strongest_per_lobe([], s) == []


def test_group_rejects_lone_glitch():
    stats = NoiseStats(1.0, 1.0)
    assert group_peaks([Peak(1000.0, 50.0)], stats) == []


def test_group_rejects_without_large_peak():
    stats = NoiseStats(1.0, 1.0)
    peaks = [Peak(100.0 * i, 1.9) for i in range(5)]
    assert group_peaks(peaks, stats) == []
    peaks[2] = Peak(200.0, 2.0)
    assert len(group_peaks(peaks, stats, edge_frac=0)) == 1


def test_group_gap_and_split():
    stats = NoiseStats(1.0, 1.0)
    a = [Peak(100.0 * i, 5.0) for i in range(4)]
    b = [Peak(1000.0 + 100.0 * i, 5.0) for i in range(4)]
    groups = group_peaks(a + b, stats)
    assert [len(g) for g in groups] == [4, 4]
    # a gap of exactly group_gap_ms separates
    c = [Peak(0.0, 5.0), Peak(100.0, 5.0), Peak(200.0, 5.0), Peak(500.0, 5.0), Peak(550.0, 5.0), Peak(600.0, 5.0)]
    assert [g.span for g in group_peaks(c, stats)] == [(0.0, 200.0), (500.0, 600.0)]
    # over-long chains split at the widest internal gap
    long = [Peak(t, 5.0) for t in (0, 200, 400, 600, 890, 1100, 1300, 1500)]
    groups = group_peaks(long, stats, max_span_ms=1000)
    assert [g.span for g in groups] == [(0.0, 600.0), (890.0, 1500.0)]


def test_group_requires_time_order():
    with pytest.raises(ValueError):
        group_peaks([Peak(10.0, 5.0), Peak(5.0, 5.0)], NoiseStats(1.0, 1.0))


@pytest.mark.parametrize("noisy", [False, True])
def test_push_gives_one_group(clean_push, noisy_push, push_entry, noisy):
    s = noisy_push if noisy else condition(clean_push[0])
    groups, stats = find_groups(s)
    off = s.t0_us / 1000
    lo, hi = push_entry.start_s * 1000, push_entry.end_s * 1000
    if noisy:
        # noise alone can form short groups elsewhere; only one may touch the gesture
        groups = [g for g in groups if g.span[1] + off >= lo and g.span[0] + off <= hi]
    assert len(groups) == 1
    start, end = (t + off for t in groups[0].span)
    assert max(groups[0].heights) >= stats.large_peak_level
    if noisy:
        # slow weak fringes at the ends can sink into the noise
        assert min(end, hi) - max(start, lo) >= 0.5 * (hi - lo)
    else:
        assert abs(start - lo) <= 200
        assert abs(end - hi) <= 200


@settings(max_examples=20)
@given(seed=st.integers(0, 2**31))
def test_groups_never_overlap(seed):
    cfg = SimConfig(seed=seed, subcarrier_count=4).with_snr_db(10)
    script = [ScriptEntry(1.5, "punch", 2.0), ScriptEntry(5.0, "ambient_walk", 6.0)]
    groups, _ = find_groups(condition(synth_trace(cfg, script, duration_s=12.0)[0]))
    for g in groups:
        assert len(g) >= 3
        assert np.all(np.diff(g.times_ms) > 0)
        assert np.all(np.diff(g.times_ms) < 300.0)
    for a, b in zip(groups, groups[1:]):
        assert a.span[1] < b.span[0]


def _group_signature(groups):
    return [tuple(p.t_ms for p in g.peaks) for g in groups]


@settings(max_examples=40)
@given(k=st.integers(-30, 30), seed=st.integers(0, 5))
def test_scale_covariance_exact(k, seed):
    # powers of two scale exactly in floating point, so equality is exact
    cfg = SimConfig(seed=seed, subcarrier_count=4).with_snr_db(12)
    s = condition(synth_trace(cfg, [ScriptEntry(1.5, "lever", 1.8)], duration_s=5.0)[0])
    c = 2.0**k
    g1, st1 = find_groups(s)
    g2, st2 = find_groups(csig(s.values * c, s.rate_hz, s.t0_us))
    assert st2.mean_abs == st1.mean_abs * c
    assert _group_signature(g2) == _group_signature(g1)
    for a, b in zip(g1, g2):
        assert np.array_equal(b.heights, a.heights * c)


@pytest.mark.parametrize("c", [0.37, 3.1, 1e4])
def test_scale_covariance_general(noisy_push, c):
    g1, _ = find_groups(noisy_push)
    g2, _ = find_groups(csig(noisy_push.values * c, noisy_push.rate_hz, noisy_push.t0_us))
    assert _group_signature(g2) == _group_signature(g1)
    for a, b in zip(g1, g2):
        assert np.allclose(b.heights, a.heights * c, rtol=1e-12, atol=0)


def test_idle_groups_decrease_with_min_size():
    cfg = SimConfig(seed=21, subcarrier_count=6).with_snr_db(10)
    s = condition(synth_trace(cfg, [], duration_s=120.0)[0])
    rates = []
    for m in range(3, 9):
        groups, _ = find_groups(s, PeakParams(min_group_size=m))
        rates.append(len(groups) / 2.0)
    assert rates[0] > 0
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rates[-1] < rates[0]


def test_estimate_noise_masks_the_gesture(noisy_push):
    boot = noise_stats(noisy_push)
    two_pass = estimate_noise(noisy_push)
    assert two_pass.mean_abs < boot.mean_abs
    # the second pass falls back to the bootstrap when nothing is grouped
    flat = csig(np.zeros(3000))
    assert estimate_noise(flat) == noise_stats(flat)
