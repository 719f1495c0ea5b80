import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokes_atlas.complexcore import (GK_NODES, GK_WEIGHTS, G_WEIGHTS,
                                      BranchTracker, CubicPolynomial,
                                      boundary_parts, f_pm1,
                                      f_pm1_with_derivative, f_segment,
                                      f_segment_with_derivative,
                                      integrate_sqrt_p, period,
                                      period_with_derivative, sqrt_p_tracked)
from stokes_atlas.errors import (BoundaryRequired, BranchAmbiguity,
                                 DegenerateParameter, OnCut)
from stokes_atlas.trajectory import check_nondegenerate

mp.mp.dps = 30


# independent oracles: mpmath quadrature of the defining integrals with
# principal square roots

def oracle_f1(a, theta):
    a = mp.mpc(a)
    g = mp.quad(lambda t: mp.sqrt(t * (1 - t)) * mp.sqrt(t * (a - 1) + 2), [0, 0.5, 1])
    return complex(1j * mp.expj(theta) * (a - 1) ** 2 * g)


def oracle_fm1(a, theta):
    a = mp.mpc(a)
    h = mp.quad(lambda t: mp.sqrt(t * (1 - t)) * mp.sqrt(2 - t * (a + 1)), [0, 0.5, 1])
    return complex(-mp.expj(theta) * (a + 1) ** 2 * h)


def oracle_ftheta(a, theta):
    a = mp.mpc(a)
    f = mp.quad(lambda t: mp.sqrt(1 - t * t) * mp.sqrt(a - t), [-1, 0, 1])
    return complex(mp.expj(theta) * f)


POINTS = [2 + 1j, -0.8 + 2j, -2.5 + 0.7j, 0.5 + 1j, 0.3 - 0.05j, -3 - 2j, 5j, 0.462j]


@pytest.mark.parametrize("a", POINTS)
@pytest.mark.parametrize("theta", [0.0, 0.2318, math.pi / 4, 2.0])
def test_periods_match_mpmath(a, theta):
    for fam, oracle in ((1, oracle_f1), (-1, oracle_fm1), ("theta", oracle_ftheta)):
        got = period(a, theta, fam)
        want = oracle(a, theta)
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want)), (fam, got, want)


def test_gauss_kronrod_rule_is_exact_to_degree():
    for deg in range(0, 23):
        exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
        assert abs(np.dot(GK_WEIGHTS, GK_NODES ** deg) - exact) < 1e-14
    for deg in range(0, 14):
        exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
        assert abs(np.dot(G_WEIGHTS, GK_NODES ** deg) - exact) < 1e-14


def test_closed_form_boundary_constant():
    r, i = boundary_parts(1.0)
    assert abs(r - 16 * math.sqrt(2) / 15) < 1e-12
    assert abs(i) < 1e-12


def test_boundary_parts_against_oracle():
    for s in (-0.9, -0.3, 0.0, 0.4, 0.95):
        r, i = boundary_parts(s)
        rr = mp.quad(lambda t: mp.sqrt(abs((t - s) * (t * t - 1))), [-1, s])
        ii = mp.quad(lambda t: mp.sqrt(abs((t - s) * (t * t - 1))), [s, 1])
        assert abs(r - float(rr)) < 1e-11 and abs(i - float(ii)) < 1e-11


def test_boundary_values_are_limits_from_each_side():
    for s in (-0.5, 0.2):
        up = f_segment(complex(s, 1e-7), 0.3)
        lo = f_segment(complex(s, -1e-7), 0.3)
        assert abs(up - f_segment(s, 0.3, "+")) < 1e-5
        assert abs(lo - f_segment(s, 0.3, "-")) < 1e-5


def test_segment_needs_side():
    with pytest.raises(BoundaryRequired):
        f_segment(0.2, 0.0)
    with pytest.raises(BoundaryRequired):
        f_segment_with_derivative(0.2, 0.0)


def test_cuts_raise():
    with pytest.raises(OnCut):
        f_pm1(-2.0, 0.0, 1)
    with pytest.raises(OnCut):
        f_pm1(3.0, 0.0, -1)


def test_value_at_own_zero_is_zero():
    assert f_pm1(1.0, 0.3, 1) == 0
    assert f_pm1(-1.0, 0.3, -1) == 0


def test_degenerate_parameter():
    with pytest.raises(DegenerateParameter):
        check_nondegenerate(1.0)
    with pytest.raises(DegenerateParameter):
        check_nondegenerate(-1 + 0j)


def test_path_integral_matches_period_definitions():
    # f_{+1} as a path integral from 1 to a, branch fixed by the reduced form
    for a in (2 + 1j, -0.8 + 2j):
        f1 = period(a, 0.0, 1)
        mid = 0.5 * (1 + a)
        pi = integrate_sqrt_p(a, [1.0, a], cmath.sqrt(complex(CubicPolynomial(a)(mid))),
                              seed_point=mid).value
        assert abs(abs(pi) - abs(f1)) < 1e-9
        assert min(abs(pi - f1), abs(pi + f1)) < 1e-9


def test_path_integral_segment_midpoint_oracle():
    # a = 2, [1, 2]: integrand sqrt((z-2)(z^2-1)) is imaginary there
    a = 2.0
    v = integrate_sqrt_p(a, [1.0, 2.0], cmath.sqrt((1.5 - 2) * (1.5 ** 2 - 1)),
                         seed_point=1.5).value
    want = complex(mp.quad(lambda t: mp.sqrt((t - 2) * (t * t - 1)), [1, 2]))
    assert abs(abs(v) - abs(want)) < 1e-9


def test_branch_tracker_continuity_and_ambiguity():
    a = 0.5 + 1j
    path = np.linspace(3 + 3j, -3 + 3j, 200)
    roots = sqrt_p_tracked(a, path, cmath.sqrt((path[0] - a) * (path[0] ** 2 - 1)))
    assert np.max(np.abs(np.diff(roots))) < 1.0
    assert np.allclose(roots ** 2, (path - a) * (path ** 2 - 1))
    tr = BranchTracker(a, 2.0, cmath.sqrt((2.0 - a) * 3.0))
    with pytest.raises(BranchAmbiguity):
        tr.advance(1.0)          # a zero: both roots coincide


def test_path_through_zero_rejected():
    with pytest.raises(BranchAmbiguity):
        integrate_sqrt_p(0.5j, [-2.0, 1.0, 2.0 + 1j], cmath.sqrt((-2 - 0.5j) * 3))


# -- invariants --------------------------------------------------------------

finite = st.floats(-4, 4, allow_nan=False)
thetas = st.floats(0, math.pi, allow_nan=False)


def _a(x, y):
    return complex(x, y)


@settings(max_examples=60, deadline=None)
@given(finite, st.floats(0.05, 4), thetas)
def test_mirror_identity(x, y, th):
    # f_{+1, pi/2 - theta}(-conj a) = conj f_{-1, theta}(a)
    for a in (_a(x, y), _a(x, -y)):
        lhs = f_pm1(-a.conjugate(), math.pi / 2 - th, 1)
        rhs = f_pm1(a, th, -1).conjugate()
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@settings(max_examples=60, deadline=None)
@given(finite, st.floats(0.01, 4), thetas, st.booleans())
def test_segment_period_is_difference_of_endpoint_periods(x, y, th, upper):
    a = _a(x, y if upper else -y)
    sg = 1.0 if upper else -1.0
    lhs = f_segment(a, th)
    rhs = -f_pm1(a, th, -1) + sg * f_pm1(a, th, 1)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


@settings(max_examples=40, deadline=None)
@given(finite, st.floats(0.05, 4), thetas, st.sampled_from([1, -1, "theta"]))
def test_derivative_matches_finite_difference(x, y, th, fam):
    a = _a(x, y)
    f, df = period_with_derivative(a, th, fam)
    h = 1e-6
    fd = (period(a + h, th, fam) - period(a - h, th, fam)) / (2 * h)
    assert abs(df - fd) <= 1e-5 * max(1.0, abs(df))
    fi = (period(a + 1j * h, th, fam) - period(a - 1j * h, th, fam)) / (2j * h)
    assert abs(df - fi) <= 1e-5 * max(1.0, abs(df))


@settings(max_examples=40, deadline=None)
@given(finite, st.floats(0.05, 4), st.floats(0, 2 * math.pi))
def test_theta_only_rotates(x, y, th):
    a = _a(x, y)
    for fam in (1, -1, "theta"):
        assert abs(period(a, th, fam) - cmath.exp(1j * th) * period(a, 0.0, fam)) < 1e-10 * max(1, abs(period(a, 0.0, fam)))
