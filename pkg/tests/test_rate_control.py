import numpy as np
import pytest
from hypothesis import given, strategies as st

from noma_dpp.rate_control import (LinearUtility, LogUtility, QuadraticUtility, optimal_rate,
                                   optimal_rate_numeric)

R_MAX = 15e6
LOG = LogUtility()


def test_empty_queue_admits_r_max():
    assert optimal_rate(0, 30.0, LOG, R_MAX) == R_MAX


def test_closed_form_interior():
    assert optimal_rate(10e6, 30.0, LOG, R_MAX) == pytest.approx(3e6, rel=1e-12)


def test_closed_form_clamps():
    assert optimal_rate(1e6, 30.0, LOG, R_MAX) == R_MAX


def test_zero_v_admits_nothing():
    assert optimal_rate(5e6, 0.0, LOG, R_MAX) == 0.0
    assert optimal_rate(0, 0.0, LOG, R_MAX) == 0.0


def test_linear_utility_threshold():
    u = LinearUtility()
    assert optimal_rate(1.0, 2.0, u, R_MAX) == R_MAX
    assert optimal_rate(3.0, 2.0, u, R_MAX) == 0.0


def test_quadratic_utility_root():
    c, v, q = 20.0, 1.0, 20.0
    u = QuadraticUtility(c)
    got = optimal_rate(q, v, u, 15.0)
    assert got == pytest.approx(c - q / (2 * v), abs=1e-9 * 15.0)
    # root beyond r_max clamps
    assert optimal_rate(1.0, v, u, 15.0) == 15.0


def test_log_derivative_non_increasing():
    x = np.linspace(0.01, 20, 500)
    d = np.array([LOG.derivative(t) for t in x])
    assert np.all(np.diff(d) <= 0)


def test_numeric_matches_closed_form_many():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        q = float(10 ** rng.uniform(4, 9))
        v = float(10 ** rng.uniform(-1, 3))
        a = optimal_rate(q, v, LOG, R_MAX)
        b = optimal_rate_numeric(q, v, LOG, R_MAX)
        assert abs(a - b) <= 1e-9 * R_MAX


@given(st.floats(1.0, 1e9), st.floats(1.0, 1e9), st.floats(0.01, 1e3))
def test_non_increasing_in_backlog(q1, q2, v):
    lo, hi = sorted((q1, q2))
    assert optimal_rate(hi, v, LOG, R_MAX) <= optimal_rate(lo, v, LOG, R_MAX)


@given(st.floats(1.0, 1e9), st.floats(0.01, 1e3), st.floats(0.01, 1e3))
def test_non_decreasing_in_v(q, v1, v2):
    lo, hi = sorted((v1, v2))
    r_lo = optimal_rate(q, lo, LOG, R_MAX)
    r_hi = optimal_rate(q, hi, LOG, R_MAX)
    assert 0.0 <= r_lo <= r_hi <= R_MAX


def test_optimality_certificate():
    rng = np.random.default_rng(11)
    unit = LOG.unit_bits
    for _ in range(1000):
        q = float(10 ** rng.uniform(4, 9))
        v = float(10 ** rng.uniform(-1, 3))
        r = optimal_rate(q, v, LOG, R_MAX)

        def score(x):
            return v * LOG.value(x / unit) - q / unit * (x / unit)

        best = score(r)
        others = rng.uniform(1e-6 * R_MAX, R_MAX, 100)
        assert all(best >= score(x) - 1e-12 * abs(best) for x in others)
