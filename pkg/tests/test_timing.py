import math

import pytest
from hypothesis import given, strategies as st

from occauth.timing import (
    InfeasibleTiming,
    TimingParams,
    flash_schedule_duration,
    max_bits,
    t_auth,
    t_latency,
)


def test_t_auth_published_operating_points():
    assert 2.95 <= t_auth(25, 8.3) <= 3.05
    assert 1.48 <= t_auth(25, 16.6) <= 1.53
    assert t_auth(0, 5) == 0.0
    with pytest.raises(ValueError):
        t_auth(25, 0)
    with pytest.raises(ValueError):
        t_auth(25, -1)


def test_t_latency_arithmetic():
    assert t_latency(14, 0.15, 0.0) == pytest.approx(2.10)
    assert t_latency(0, 0.15, 0.5) == pytest.approx(0.5)
    # brute-force oracle: sum per-bit durations
    brute = sum(0.15 for _ in range(14)) + 0.4
    assert t_latency(14, 0.15, 0.4) == pytest.approx(brute) == pytest.approx(2.50)
    with pytest.raises(ValueError):
        t_latency(-1, 0.15, 0.0)


def test_max_bits_against_feasibility_oracle():
    n = max_bits(25, 8.3, 0.5, 0.15)
    assert t_latency(n, 0.15, 0.5) <= t_auth(25, 8.3) < t_latency(n + 1, 0.15, 0.5)
    assert n == 16

    n2 = max_bits(25, 16.6, 0.5, 0.15)
    assert t_latency(n2, 0.15, 0.5) <= t_auth(25, 16.6) < t_latency(n2 + 1, 0.15, 0.5)
    assert n2 == 6


def test_max_bits_infeasible_boundary():
    with pytest.raises(InfeasibleTiming):
        max_bits(10, 5.0, 2.0, 0.15)  # d/v == t_c exactly
    with pytest.raises(InfeasibleTiming):
        max_bits(10, 5.0, 3.0, 0.15)


def test_flash_schedule_duration():
    assert flash_schedule_duration(14, 0.15) == pytest.approx(1.05)
    assert flash_schedule_duration(2, 0.15) == pytest.approx(0.15)
    assert flash_schedule_duration(14, 0.10) == pytest.approx(0.70)
    with pytest.raises(ValueError):
        flash_schedule_duration(13, 0.15)


def test_params_validation():
    p = TimingParams()
    assert p.available_s == pytest.approx(25 / 8.3)
    assert p.latency_s == pytest.approx(14 * 0.15 + 0.4)
    for bad in (dict(d=0), dict(v=0), dict(t_f=0), dict(t_c=-1), dict(n=13), dict(n=0)):
        with pytest.raises(ValueError):
            TimingParams(**bad)


@given(n=st.integers(0, 200), t_f=st.floats(0.01, 1.0), t_c=st.floats(0.0, 5.0))
def test_latency_monotone_in_bits(n, t_f, t_c):
    assert t_latency(n + 1, t_f, t_c) > t_latency(n, t_f, t_c)


@given(d=st.floats(1.0, 200.0), v=st.floats(0.5, 50.0),
       t_c=st.floats(0.0, 2.0), t_f=st.floats(0.05, 0.5))
def test_max_bits_bracket_property(d, v, t_c, t_f):
    budget = t_auth(d, v)
    if budget <= t_c + 1e-9:
        return
    n = max_bits(d, v, t_c, t_f)
    assert n >= 0
    assert t_latency(n, t_f, t_c) <= budget + 1e-9
    assert t_latency(n + 1, t_f, t_c) > budget - 1e-9


@given(n=st.integers(0, 100).map(lambda k: 2 * k), t_f=st.floats(0.01, 1.0))
def test_schedule_is_half_the_serial_latency(n, t_f):
    assert flash_schedule_duration(n, t_f) == pytest.approx(t_latency(n, t_f, 0.0) / 2)
