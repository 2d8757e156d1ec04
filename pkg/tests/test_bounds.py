import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from mpmath import mp, mpf, log as mlog, sqrt as msqrt

from gsmdetect.bounds import (
    C_constant,
    ErrorBudget,
    TruncationWarning,
    c_constant,
    compute_bounds,
    cumulative_b4,
    hyp_ab_check,
    lower_radius,
    upper_radius,
)
from gsmdetect.model import ProblemSpec, SequenceFamily, make_spec

B05 = ErrorBudget(0.05, 0.05)


def test_budget_domain():
    for a, b in [(0, 0.1), (0.1, 1.0), (-0.1, 0.5)]:
        with pytest.raises(ValueError):
            ErrorBudget(a, b)
    assert ErrorBudget(0.6, 0.5).degenerate


class TestConstants:
    def test_c_at_standard_budget(self):
        # closed form at 50 digits: 1.30374195304943402...
        assert c_constant(B05) == pytest.approx(1.3037419530494340, rel=1e-14)

    def test_c_vanishes_near_degenerate(self):
        vals = [c_constant(ErrorBudget(0.5, 0.5 - d)) for d in (1e-1, 1e-2, 1e-3)]
        assert vals[0] > vals[1] > vals[2] > 0
        assert vals[2] < 0.1

    def test_c_quarter_budget(self):
        assert c_constant(ErrorBudget(0.25, 0.25)) == pytest.approx((2 * math.log(2)) ** 0.25, rel=1e-14)
        assert c_constant(ErrorBudget(0.25, 0.25)) == pytest.approx(1.0850852604820852, rel=1e-14)

    def test_c_rejects_degenerate(self):
        with pytest.raises(ValueError):
            c_constant(ErrorBudget(0.5, 0.5))

    def test_C_at_standard_budget(self):
        assert C_constant(B05) == pytest.approx(8.5406, abs=1e-3)

    def test_C_unit_logs(self):
        e1 = math.exp(-1)
        assert C_constant(ErrorBudget(e1, e1)) == pytest.approx(math.sqrt(2) + 4, rel=1e-14)

    def test_C_monotone(self):
        assert C_constant(B05) > C_constant(ErrorBudget(0.25, 0.25))

    @given(st.floats(0.01, 0.49), st.floats(0.01, 0.49))
    def test_against_high_precision(self, a, b):
        mp.dps = 40
        gap = 1 - mpf(a) - mpf(b)
        c_ref = (2 * mlog(1 + 4 * gap**2)) ** mpf(0.25)
        xa, xb = mlog(1 / mpf(a)), mlog(1 / mpf(b))
        C_ref = msqrt(2 * xb) + msqrt(2 * (xa + xb)) + msqrt(2) * msqrt(msqrt(xa) + msqrt(xb))
        bud = ErrorBudget(a, b)
        assert c_constant(bud) == pytest.approx(float(c_ref), rel=1e-13)
        assert C_constant(bud) == pytest.approx(float(C_ref), rel=1e-13)


class TestCumulative:
    def test_direct(self):
        assert cumulative_b4(make_spec("direct", 1, 0, 0.1, 20), 9) == 9

    def test_t_one(self):
        assert cumulative_b4(make_spec("mild", 1, 1, 0.1, 20), 3) == pytest.approx(98.0, rel=1e-14)

    def test_t_half(self):
        assert cumulative_b4(make_spec("mild", 1, 0.5, 0.1, 20), 2) == pytest.approx(5.0, rel=1e-15)

    def test_range(self, mild11):
        with pytest.raises(ValueError):
            cumulative_b4(mild11, 0)
        with pytest.raises(ValueError):
            cumulative_b4(mild11, mild11.N + 1)

    def test_prefix_differences(self, mild11):
        S = [cumulative_b4(mild11, d) for d in range(1, 30)]
        np.testing.assert_allclose(np.diff(S), mild11.b[1:29] ** -4.0, rtol=1e-15)


class TestLowerRadius:
    def test_direct_example(self):
        r2, d0 = lower_radius(make_spec("direct", 1, 0, 0.1, 50), B05)
        assert d0 == 5
        assert r2 == pytest.approx(0.02915, abs=1e-5)
        assert r2 == pytest.approx(c_constant(B05) * 0.01 * math.sqrt(5), rel=1e-14)

    def test_large_noise_saturates(self):
        r2, d0 = lower_radius(make_spec("mild", 1, 1, 10.0, 50), B05)
        assert (r2, d0) == (1.0, 1)

    def test_degenerate_budget(self, mild11):
        assert lower_radius(mild11, ErrorBudget(0.5, 0.5)) == (0.0, 1)

    def test_tie_break_smallest(self):
        # a constant: a_D^-2 is the same for every D, so with huge noise every D ties
        spec = ProblemSpec(SequenceFamily.explicit([1.0] * 5), SequenceFamily.direct(), 100.0, 5)
        assert lower_radius(spec, B05) == (1.0, 1)


class TestUpperRadius:
    def test_direct_example(self):
        r2, dstar = upper_radius(make_spec("direct", 1, 0, 0.1, 50), B05)
        assert dstar == 5
        assert r2 == pytest.approx(0.2310, abs=1e-4)
        brute = min(C_constant(B05) * 0.01 * math.sqrt(D) + D**-2 for D in range(1, 51))
        assert r2 == pytest.approx(brute, rel=1e-14)

    def test_noiseless_hits_truncation(self):
        spec = make_spec("mild", 1, 1, 0.0, 40)
        with pytest.warns(TruncationWarning):
            r2, dstar = upper_radius(spec, B05)
        assert dstar == 40 and r2 == pytest.approx(40.0**-2)

    def test_no_warning_inside(self, mild11):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            upper_radius(mild11, B05)


@given(
    st.sampled_from(["direct", "mild", "severe"]),
    st.floats(0.5, 3.0),
    st.floats(0.1, 2.0),
    st.floats(1e-5, 1.0),
    st.floats(0.01, 0.45),
    st.floats(0.01, 0.45),
)
def test_sandwich(family, s, t, eps, alpha, beta):
    n = 150 if family != "severe" else min(150, int(170 / t))
    spec = make_spec(family, s, t, eps, n)
    bud = ErrorBudget(alpha, beta)
    lo, d0 = lower_radius(spec, bud)
    up, ds = upper_radius(spec, bud, warn=False)
    assert lo <= up
    assert 1 <= d0 <= spec.N and 1 <= ds <= spec.N


@given(st.floats(1e-4, 0.5), st.floats(1.01, 3.0))
def test_monotone_in_noise(eps, factor):
    a = make_spec("mild", 1, 1, eps, 200)
    b = a.with_noise(eps * factor)
    assert lower_radius(a, B05)[0] <= lower_radius(b, B05)[0]
    assert upper_radius(a, B05, warn=False)[0] <= upper_radius(b, B05, warn=False)[0]


@given(st.floats(0.01, 0.3), st.floats(0.01, 0.3), st.floats(0.001, 0.3))
def test_monotone_in_beta(alpha, beta, dbeta):
    spec = make_spec("mild", 1, 1, 1e-2, 200)
    lo_small, lo_big = ErrorBudget(alpha, beta), ErrorBudget(alpha, min(beta + dbeta, 0.99 - alpha))
    assert lower_radius(spec, lo_big)[0] <= lower_radius(spec, lo_small)[0]
    assert upper_radius(spec, lo_big, warn=False)[0] <= upper_radius(spec, lo_small, warn=False)[0]


class TestHypAB:
    @pytest.mark.parametrize("s,t", [(1, 1), (2, 0.5), (0.5, 2)])
    def test_polynomial(self, s, t):
        chk = hyp_ab_check(make_spec("mild", s, t, 0.1, 500))
        assert chk.satisfied
        assert chk.a_ratio_range[0] == pytest.approx(0.5**s)

    def test_power_exponential(self):
        a = np.exp(np.arange(1, 25, dtype=float) ** 2)
        spec = ProblemSpec(SequenceFamily.explicit(a), SequenceFamily.direct(), 0.1, 24)
        assert not hyp_ab_check(spec).satisfied

    def test_direct(self):
        chk = hyp_ab_check(make_spec("direct", 1, 0, 0.1, 50))
        assert chk.satisfied and chk.b_ratio_range == (1.0, 1.0)

    def test_exponential_still_in_band(self):
        spec = ProblemSpec(SequenceFamily.exponential_growth(1.0), SequenceFamily.direct(), 0.1, 50)
        assert hyp_ab_check(spec).satisfied

    def test_needs_three(self, toy2):
        with pytest.raises(ValueError):
            hyp_ab_check(toy2)


def test_same_order_ratio_bounded():
    # regression constant: the upper/lower ratio for s=t=1 stays in a fixed band over two decades
    ratios = []
    for eps in np.logspace(-4, -2, 5):
        rep = compute_bounds(make_spec("mild", 1, 1, eps, 5000), B05)
        assert rep.hyp_ab_satisfied and not rep.truncation_binding
        ratios.append(rep.ratio)
    assert max(ratios) < 10.0
    assert max(ratios) / min(ratios) < 2.0


def test_report_fields(mild11):
    rep = compute_bounds(mild11, B05).to_dict()
    assert set(rep) >= {"lower_radius_sq", "upper_radius_sq", "lower_bandwidth", "upper_bandwidth", "c_const", "C_const", "ratio", "hyp_ab_satisfied"}
    assert rep["lower_radius_sq"] <= rep["upper_radius_sq"]
