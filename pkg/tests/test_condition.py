import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from oracles import count_extrema, linear_interp, shrinking_window_mean, two_path_amplitude
from wigest.condition import (
    ConditionedSignal,
    SignalConditioner,
    UniformSignal,
    condition,
    condition_segments,
    lowpass,
    lowpass_taps,
    normalize,
    resample,
)
from wigest.errors import GapTooLarge, SignalTooShort, TooFewPoints
from wigest.synth import ScriptEntry, SimConfig, expected_fringe_count, synth_trace, trajectory
from wigest.trace import SingleSubcarrier, Series, aggregate

finite = st.floats(-1e3, 1e3, allow_nan=False)


def sig(values, rate=1000.0):
    return UniformSignal(rate, 0, np.asarray(values, dtype=float))


def test_resample_uniform_input_unchanged():
    t = np.arange(50) * 1000
    v = np.sin(np.arange(50))
    out = resample(Series(t, v), 1000.0)
    assert np.array_equal(out.values, v)


def test_resample_midpoint():
    out = resample(Series(np.array([0, 2000]), np.array([1.0, 3.0])), 1000.0)
    assert out.values.tolist() == [1.0, 2.0, 3.0]


def test_resample_errors():
    with pytest.raises(TooFewPoints):
        resample(Series(np.array([0]), np.array([1.0])))
    with pytest.raises(GapTooLarge) as exc:
        resample(Series(np.array([0, 1000, 700_000]), np.ones(3)))
    assert exc.value.start_us == 1000 and exc.value.len_us == 699_000


@given(
    slope=st.floats(-100, 100),
    icept=st.floats(-100, 100),
    gaps=st.lists(st.integers(1, 4000), min_size=1, max_size=200),
)
def test_resample_exact_on_affine(slope, icept, gaps):
    t = np.concatenate([[0], np.cumsum(gaps)]).astype(np.int64)
    line = lambda x: icept + slope * x / 1e6
    out = resample(Series(t, line(t.astype(float))), 1000.0)
    want = line(np.arange(len(out)) * 1000.0)
    scale = max(1.0, np.abs(want).max())
    assert np.abs(out.values - want).max() <= 1e-12 * scale


def test_resample_matches_bracketing_oracle():
    rng = np.random.default_rng(3)
    t = np.concatenate([[0], np.cumsum(rng.integers(100, 3000, 300))])
    v = rng.normal(size=t.size)
    out = resample(Series(t, v), 1000.0)
    want = linear_interp(t.astype(float), v, np.arange(len(out)) * 1000.0)
    assert np.allclose(out.values, want, rtol=0, atol=1e-12)
    assert len(out) == t[-1] // 1000 + 1


def test_resample_error_within_curvature_bound():
    # one subcarrier, no noise: the dense oracle is the two-path formula on the arm path
    entry = ScriptEntry(0.0, "push", 1.5, 0.2, 0.6)
    cfg = SimConfig(subcarrier_count=1, seed=9, packet_rate_pps=400)
    trace, _ = synth_trace(cfg, [entry])
    out = resample(aggregate(trace, SingleSubcarrier(0)), 1000.0)
    traj = trajectory("push", 1.5, 0.2, 0.6)
    lam = cfg.wavelength_m
    f = lambda t_s: two_path_amplitude(np.interp(t_s, traj.t_s, traj.d_m), lam)

    fine_dt = 1e-5
    t_fine = np.arange(0, 1.5 + fine_dt, fine_dt)
    curv = np.abs(np.gradient(np.gradient(f(t_fine), fine_dt), fine_dt))
    pk = trace.t_us / 1e6
    grid = out.t0_us / 1e6 + np.arange(len(out)) / 1000.0
    j = np.clip(np.searchsorted(pk, grid, side="right") - 1, 0, pk.size - 2)
    lo = np.searchsorted(t_fine, pk[j])
    hi = np.searchsorted(t_fine, pk[j + 1])
    local = np.array([curv[a : b + 1].max() for a, b in zip(lo, hi)])
    bound = (pk[j + 1] - pk[j]) ** 2 / 8 * local
    err = np.abs(out.values - f(grid))
    assert np.all(err <= 2 * bound + 1e-12)


def test_lowpass_constant_exact():
    for c in (0.0, 1.0, -3.7, 1e6 + 0.1):
        out = lowpass(sig(np.full(500, c)))
        assert np.all(out.values == c)


def test_lowpass_impulse_is_rectangle():
    x = np.zeros(1000)
    x[500] = 1.0
    out = lowpass(sig(x)).values
    nz = np.flatnonzero(np.abs(out) > 1e-15)
    assert nz.size == 100
    assert np.allclose(out[nz], 1 / 100, rtol=0, atol=1e-15)
    # group delay removed: the rectangle sits around the impulse
    assert nz[0] <= 500 <= nz[-1] and abs((nz[0] + nz[-1]) / 2 - 500) <= 0.5


def test_lowpass_kills_nyquist():
    x = np.where(np.arange(1000) % 2 == 0, 1.0, -1.0)
    out = lowpass(sig(x)).values
    assert np.abs(out[50:-50]).max() < 1e-12


def test_lowpass_taps_follow_rate():
    assert lowpass_taps(1000.0) == 100
    assert lowpass_taps(200.0) == 20
    with pytest.raises(SignalTooShort):
        lowpass(sig(np.ones(99)))


def test_lowpass_matches_direct_oracle():
    x = np.random.default_rng(0).normal(size=400)
    out = lowpass(sig(x)).values
    assert np.allclose(out, shrinking_window_mean(x, 49, 50), rtol=0, atol=1e-12)


@given(
    x=arrays(np.float64, 300, elements=finite),
    y=arrays(np.float64, 300, elements=finite),
    a=st.floats(-10, 10),
    b=st.floats(-10, 10),
)
def test_lowpass_is_linear(x, y, a, b):
    lhs = lowpass(sig(a * x + b * y)).values
    rhs = a * lowpass(sig(x)).values + b * lowpass(sig(y)).values
    scale = max(1.0, np.abs(a * x).max(), np.abs(b * y).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


@given(x=arrays(np.float64, st.integers(100, 400), elements=finite))
def test_lowpass_never_grows_peak(x):
    assert np.abs(lowpass(sig(x)).values).max() <= np.abs(x).max() * (1 + 1e-12)


@given(c=finite, n=st.integers(301, 2000))
def test_normalize_constant_is_zero(c, n):
    out = normalize(sig(np.full(n, c)))
    assert isinstance(out, ConditionedSignal)
    assert np.all(out.values == 0.0)


def test_normalize_ramp_interior_zero():
    x = np.linspace(-5.0, 5.0, 3000)
    out = normalize(sig(x)).values
    assert np.abs(out[200:-200]).max() < 1e-9 * 10.0


def test_normalize_matches_direct_oracle():
    x = np.random.default_rng(1).normal(size=800)
    out = normalize(sig(x)).values
    assert np.allclose(out, x - shrinking_window_mean(x, 150, 150), rtol=0, atol=1e-12)
    with pytest.raises(SignalTooShort):
        normalize(sig(np.ones(300)))


def test_condition_idle_noise_level():
    cfg = SimConfig(seed=2).with_snr_db(15)
    trace, _ = synth_trace(cfg, [], duration_s=10.0)
    v = condition(trace).values
    assert np.abs(v).max() < 3 * cfg.noise_sigma / np.sqrt(100)


def test_condition_push_fringes(clean_push, push_entry):
    trace, _ = clean_push
    s = condition(trace)
    lo, hi = push_entry.start_s * 1000, push_entry.end_s * 1000
    t = s.t_ms + s.t0_us / 1000
    window = s.values[(t >= lo) & (t <= hi)]
    expect = expected_fringe_count(trajectory("push", push_entry.duration_s, 0.2, 0.6), SimConfig().wavelength_m)
    assert expect == 13
    assert abs(count_extrema(window) - expect) <= 2


def test_condition_quiet_windows_are_zero_mean(clean_push, push_entry):
    trace, _ = clean_push
    s = condition(trace)
    raw_scale = np.abs(aggregate(trace).values).mean()
    t = s.t_ms + s.t0_us / 1000
    fringe = np.abs(s.values).max()
    for lo, hi in ((0, push_entry.start_s * 1000 - 500), (push_entry.end_s * 1000 + 500, t[-1])):
        m = s.values[(t >= lo) & (t <= hi)]
        assert (hi - lo) >= 1000
        assert abs(m.mean()) < 1e-6 * raw_scale
        assert abs(m.mean()) < 1e-3 * fringe


def test_condition_errors():
    empty, _ = synth_trace(SimConfig(packet_rate_pps=1), [], duration_s=1e-4)
    with pytest.raises(TooFewPoints):
        condition(empty)


def test_condition_segments_split_at_gaps():
    cfg = SimConfig(seed=1, packet_rate_pps=400, burst_gap_ms=(800.0, 0.3), subcarrier_count=2)
    trace, _ = synth_trace(cfg, [], duration_s=20.0)
    gaps = np.diff(trace.t_us)
    assert (gaps > 500_000).any()
    with pytest.raises(GapTooLarge):
        condition(trace)
    segs = condition_segments(trace)
    assert 1 < len(segs) <= (gaps > 500_000).sum() + 1
    assert all(s.t0_us in set(trace.t_us.tolist()) for s in segs)


def test_signal_conditioner_estimator(clean_push):
    trace, _ = clean_push
    sc = SignalConditioner(agg="sub:3")
    assert sc.get_params() == {"agg": "sub:3", "rate_hz": 1000.0, "window_ms": 300.0, "max_gap_ms": 500.0}
    assert clone(sc).get_params() == sc.get_params()
    out = sc.fit([trace]).transform([trace])
    assert len(out) == 1 and len(out[0]) == 1
    direct = condition(trace, SingleSubcarrier(3))
    assert np.array_equal(out[0][0].values, direct.values)
    with pytest.raises(ValueError):
        SignalConditioner(rate_hz=0).fit([trace])
