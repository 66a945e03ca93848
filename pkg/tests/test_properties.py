"""Property-based checks of the pure algebraic invariants."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st

from sepsync.comb import DiracComb, phase_of
from sepsync.protocol import make_ideal_session, ntp_offset, rounded_phase_diff
from sepsync.signals import SepTrace, bandpass_filter, mean_removal_filter, quantize
from sepsync.solver import EmptySolutionSpaceError, SolutionSpace, intersect

COMMON = settings(derandomize=True, max_examples=80, deadline=None)

T = 20.0
phases = st.floats(min_value=0.0, max_value=T * 1.1, exclude_max=True,
                   allow_nan=False)


@COMMON
@given(phases, phases)
def test_rounded_phase_diff_range(late, early):
    theta = rounded_phase_diff(late, early, T)
    assert 0.0 <= theta < T


@COMMON
@given(st.floats(min_value=0.0, max_value=T, exclude_max=True),
       st.floats(min_value=0.0, max_value=T, exclude_max=True))
def test_rounded_phase_diff_branch_semantics(late, early):
    # on the nominal [0, T) domain the fold equals the two-branch form
    expected = late - early if late - early >= 0 else late - early + T
    assert math.isclose(rounded_phase_diff(late, early, T), expected,
                        abs_tol=1e-12)


@COMMON
@given(st.lists(st.integers(min_value=0, max_value=12), min_size=1,
                max_size=6, unique=True).map(sorted),
       st.floats(min_value=-8.0, max_value=8.0))
def test_intersect_preserves_separation(levels, wobble):
    space = intersect(SolutionSpace(), [k * T for k in levels], T)
    try:
        space = intersect(space, [k * T + wobble for k in levels], T)
    except EmptySolutionSpaceError:
        return
    reps = space.representatives()
    for a, b in zip(reps, reps[1:]):
        assert b - a >= T / 2 - 1e-9
    assert len(space.clusters) <= len(levels)
    for cluster in space.clusters:
        for member in cluster.members:
            assert abs(member - cluster.representative) < T / 2 + 1e-9


@COMMON
@given(st.floats(min_value=0.1, max_value=59.9),
       st.floats(min_value=0.0, max_value=19.9))
def test_phase_of_unit_slope(t, dt):
    comb = DiracComb(np.arange(5) * T)
    t = min(t, 79.9)
    phi = phase_of(comb, t)
    ahead = t + min(dt, T - phi - 1e-9, 79.9 - t)
    if math.floor(t / T) == math.floor(ahead / T):
        assert math.isclose(phase_of(comb, ahead) - phi, ahead - t,
                            abs_tol=1e-9)


@COMMON
@given(st.floats(min_value=0.05, max_value=1.0))
def test_filter_linearity_under_scaling(scale):
    rng = np.random.default_rng(6)
    base = 0.5 + 0.45 * np.sin(2 * math.pi * 50 * np.arange(400) / 333.0) \
        + 0.02 * rng.standard_normal(400)
    base = base.clip(0.0, 1.0)
    trace = SepTrace(0.0, 333.0, base)
    scaled = SepTrace(0.0, 333.0, (base * scale).clip(0.0, 1.0))
    direct = bandpass_filter(scaled).samples
    linear = scale * bandpass_filter(trace).samples
    assert np.allclose(direct, linear, rtol=1e-9, atol=1e-12)

    direct_m = mean_removal_filter(scaled, 7).samples
    linear_m = scale * mean_removal_filter(trace, 7).samples
    assert np.allclose(direct_m, linear_m, rtol=1e-9, atol=1e-12)


@COMMON
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1,
                max_size=64),
       st.integers(min_value=4, max_value=12))
def test_quantize_error_bounded(values, bits):
    x = np.array(values)
    q = quantize(x, bits)
    assert np.max(np.abs(q - x)) <= 2.0 ** -(bits + 1) + 1e-12
    assert np.array_equal(quantize(q, bits), q)


@COMMON
@given(st.floats(min_value=0.0, max_value=120.0),
       st.floats(min_value=0.0, max_value=120.0),
       st.floats(min_value=-300.0, max_value=300.0))
def test_ntp_error_is_half_asymmetry(tau_q, tau_p, delta):
    rec = make_ideal_session(tau_q, tau_p, delta_gt_ms=delta)
    err = ntp_offset(rec) - delta
    assert math.isclose(err, (tau_p - tau_q) / 2, abs_tol=2e-3)
