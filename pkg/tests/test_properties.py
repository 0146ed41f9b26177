"""Hypothesis property suites for the algebraic invariants."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from saabounds.bounds import (BoundParams, MomentConstants, bound_a, bound_b,
                              risk_beta_terms, tau_star)
from saabounds.geometry import prox_entropy, simplex_l1_spec

finite = dict(allow_nan=False, allow_infinity=False, allow_subnormal=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=-30.0, max_value=30.0, **finite),
                min_size=2, max_size=8),
       st.floats(min_value=1e-3, max_value=5.0, **finite),
       st.floats(min_value=-100.0, max_value=100.0, **finite))
def test_prox_entropy_feasible_and_shift_invariant(g, step, shift):
    n = len(g)
    x = np.full(n, 1.0 / n)
    g = np.array(g)
    out = prox_entropy(x, g, step)
    assert abs(float(out.sum()) - 1.0) <= 1e-12
    assert np.all(out > 0.0)
    shifted = prox_entropy(x, g + shift, step)
    assert np.allclose(out, shifted, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=4.5, **finite),
       st.floats(min_value=1.0, max_value=3.0, **finite),
       st.floats(min_value=0.0, max_value=4.5, **finite),
       st.integers(min_value=20, max_value=10_000))
def test_margins_nonnegative_and_scale_with_constants(mu, s, lam, N):
    geo = simplex_l1_spec(3)
    c1 = MomentConstants(1.0, 1.0)
    c2 = MomentConstants(2.0, 2.0)
    a1 = bound_a(mu, N, c1.m1)
    b1 = bound_b(mu, s, lam, N, c1, geo)
    assert a1 >= 0.0 and b1 > 0.0
    assert math.isclose(bound_a(mu, N, c2.m1), a1 * 2.0, rel_tol=1e-14, abs_tol=0.0) or a1 == 0.0
    assert math.isclose(bound_b(mu, s, lam, N, c2, geo), b1 * 2.0, rel_tol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=4.0, **finite),
       st.floats(min_value=0.0, max_value=4.0, **finite),
       st.floats(min_value=1.0, max_value=2.0, **finite),
       st.floats(min_value=0.0, max_value=4.0, **finite),
       st.integers(min_value=20, max_value=1000))
def test_risk_terms_shrink_when_any_parameter_grows(mu1, mu2, s, lam, N):
    base = BoundParams(mu1, mu2, s, lam, N)
    terms = risk_beta_terms(base)
    assert all(0.0 <= t <= 1.0 for t in terms)  # extreme params underflow to 0
    bumped = BoundParams(mu1 + 0.5, mu2 + 0.5, s + 0.1, lam + 0.5, N)
    for lo, hi in zip(risk_beta_terms(bumped), terms):
        assert lo <= hi


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-20.0, max_value=20.0, **finite))
def test_tau_star_inequality_pointwise(t):
    assert math.exp(t) <= t + math.exp(tau_star() * t * t) + 1e-12
