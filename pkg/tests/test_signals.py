import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buckvrft.signals import (ChirpSpec, ConditioningError, ReferenceModel,
                              SignalDomainError, accumulate, chirp,
                              discretize_first_order, virtual_error,
                              virtual_reference)


def test_discretize_reference_case():
    # time constant from the target bandwidth: 200 kHz switching / 100
    m = discretize_first_order(tau=0.5e-3, t_samp=100e-6)
    assert m.a_d == pytest.approx(math.exp(-0.2), rel=1e-12)
    assert m.b_d == pytest.approx(1.0 - math.exp(-0.2), rel=1e-12)


def test_discretize_limits_and_domain():
    fast = discretize_first_order(tau=1.0, t_samp=1e-9)
    assert fast.a_d == pytest.approx(1.0, abs=1e-8)
    assert fast.b_d == pytest.approx(0.0, abs=1e-8)
    for tau, t_samp in ((0.0, 1e-4), (-1.0, 1e-4), (1e-3, 0.0)):
        with pytest.raises(SignalDomainError):
            discretize_first_order(tau, t_samp)


def test_unit_dc_gain_step_response():
    m = discretize_first_order(tau=0.5e-3, t_samp=100e-6)
    y = m.filter(np.ones(400))
    # geometric series: y_n = 1 - a^n
    assert y[-1] == pytest.approx(1.0 - m.a_d ** 399, rel=1e-12)
    assert y[-1] == pytest.approx(1.0, abs=1e-9)


@given(st.floats(min_value=1e-5, max_value=10.0),
       st.floats(min_value=1e-6, max_value=1e-2))
@settings(max_examples=50)
def test_discretize_monotone_in_tau(tau, t_samp):
    m1 = discretize_first_order(tau, t_samp)
    m2 = discretize_first_order(tau * 1.5, t_samp)
    assert m2.a_d > m1.a_d


def test_chirp_starts_at_offset():
    spec = ChirpSpec(f_start=1000.0, f_end=4000.0, duration=0.05,
                     amplitude=0.1, offset=0.5)
    ts = chirp(spec, 1e-4)
    assert ts.channel("d")[0] == pytest.approx(0.5)
    assert ts.n == 501


def test_chirp_zero_crossing_count():
    # oracle: a linear sweep from f0 to f1 crosses zero duration*(f0+f1) times
    spec = ChirpSpec(f_start=1000.0, f_end=4000.0, duration=0.05,
                     amplitude=0.1, offset=0.5)
    ts = chirp(spec, 1e-6)
    sig = ts.channel("d") - 0.5
    crossings = np.count_nonzero(np.diff(np.sign(sig)) != 0)
    assert abs(crossings - 0.05 * (1000 + 4000)) <= 2


def test_chirp_domain():
    with pytest.raises(SignalDomainError):
        ChirpSpec(f_start=1000, f_end=4000, duration=0.05,
                  amplitude=0.6, offset=0.5)
    with pytest.raises(SignalDomainError):
        ChirpSpec(f_start=0.0, f_end=4000, duration=0.05,
                  amplitude=0.1, offset=0.5)
    spec = ChirpSpec(f_start=1000, f_end=4000, duration=0.05,
                     amplitude=0.1, offset=0.5)
    with pytest.raises(SignalDomainError):
        chirp(spec, 0.0)


@given(st.floats(min_value=10.0, max_value=5000.0),
       st.floats(min_value=10.0, max_value=5000.0),
       st.floats(min_value=0.01, max_value=0.45),
       st.floats(min_value=0.05, max_value=0.5))
@settings(max_examples=50)
def test_chirp_bounded(f0, f1, amplitude, margin):
    offset = amplitude + margin * (1.0 - 2 * amplitude)
    spec = ChirpSpec(f_start=f0, f_end=f1, duration=0.01,
                     amplitude=amplitude, offset=offset)
    d = chirp(spec, 1e-5).channel("d")
    assert d.min() >= offset - amplitude - 1e-15
    assert d.max() <= offset + amplitude + 1e-15


def test_virtual_reference_constant():
    m = discretize_first_order(0.5e-3, 1e-4)
    r = virtual_reference(np.full(100, 3.3), m)
    assert r.shape == (99,)
    assert np.allclose(r, 3.3, rtol=1e-12)


def test_virtual_reference_round_trip_from_filter():
    m = discretize_first_order(0.5e-3, 1e-4)
    rng = np.random.default_rng(0)
    r0 = rng.standard_normal(200)
    y = m.filter(r0, y0=0.0)
    r = virtual_reference(y, m)
    assert np.allclose(r, r0[:-1], rtol=1e-10, atol=1e-12)


@given(st.integers(min_value=0, max_value=2 ** 32 - 1),
       st.floats(min_value=1e-4, max_value=1e-1),
       st.floats(min_value=1e-6, max_value=1e-3))
@settings(max_examples=50)
def test_inversion_round_trip_property(seed, tau, t_samp):
    m = discretize_first_order(tau, t_samp)
    rng = np.random.default_rng(seed)
    y = rng.uniform(-5, 5, size=64)
    r = virtual_reference(y, m)
    y_back = m.filter(np.append(r, 0.0), y0=y[0])
    assert np.allclose(y_back[1:], y[1:], rtol=1e-10, atol=1e-10)


def test_virtual_reference_degenerate_model():
    m = ReferenceModel(tau=1.0, t_samp=1e-15, a_d=1.0, b_d=1e-13)
    with pytest.raises(ConditioningError):
        virtual_reference(np.ones(10), m)
    good = discretize_first_order(0.5e-3, 1e-4)
    with pytest.raises(SignalDomainError):
        virtual_reference(np.ones(1), good)


def test_virtual_error():
    y = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(virtual_error(y, y), np.zeros(3))
    assert np.array_equal(virtual_error(y, y + 1.0), np.ones(3))
    with pytest.raises(SignalDomainError):
        virtual_error(y, y[:-1])


def test_accumulate():
    assert np.array_equal(accumulate([1.0, 1.0, 1.0]), [1.0, 2.0, 3.0])
    assert np.array_equal(accumulate(np.zeros(4)), np.zeros(4))
    with pytest.raises(SignalDomainError):
        accumulate(np.array([]))


def test_accumulate_first_difference_exact_small_ints():
    e = np.array([3.0, -1.0, 4.0, -1.0, 5.0])
    assert np.array_equal(np.diff(accumulate(e), prepend=0.0), e)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=64))
@settings(max_examples=100)
def test_accumulate_first_difference_identity(values):
    e = np.asarray(values)
    s = accumulate(e)
    # recovery is exact up to one rounding of the running sum per step
    tol = 8.0 * np.spacing(np.abs(s).max() + 1.0)
    assert np.allclose(np.diff(s, prepend=0.0), e, rtol=0.0, atol=tol)
