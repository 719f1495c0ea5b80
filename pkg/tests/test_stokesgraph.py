import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokes_atlas.errors import AngleSnapFailure, NonPlanar
from stokes_atlas.levelset import locate
from stokes_atlas.stokesgraph import (Corner, Edge, _check_planar, classify,
                                      face_of, relabel_sym1, relabel_sym2,
                                      teichmuller_residual)
from stokes_atlas.trajectory import ZERO_LABELS

PI = math.pi


def test_two_strip_example_edges():
    c = classify(2 + 1j, 0.0)
    labels = sorted(e.label for e in c.graph.edges)
    for want in ("+1:D1", "+1:D4", "a:D0", "a:D1", "a:D4"):
        assert want in labels
    assert (c.half_planes, c.strips, c.shorts) == (5, 2, 0)


def test_tree_example():
    c = classify(0.462j, PI / 4, snap=1e-2)
    assert c.tree and c.summit == "a" and c.strips == 0 and c.shorts == 2


def test_single_short_strip_contains_segment():
    c = classify(-1.95 + 0.87j, 0.0, snap=1e-2)
    assert c.short_pairs == ("-1~a",) and c.strips == 1
    (strip,) = c.decomposition.strips
    assert any(lo <= -0.99 and hi >= 0.99 for lo, hi in strip.real_intervals)
    assert face_of(c.graph, c.decomposition, 0.0) == strip.face


def test_degrees_and_euler():
    c = classify(-0.8 + 2j, 0.0)
    for z in ZERO_LABELS:
        assert c.graph.degree(z) == 3
    V, E, F = 4, len(c.graph.edges), len(c.decomposition.faces)
    assert V - E + F == 2


def test_teichmuller_synthetic_cases():
    # bigon with two simple-zero corners of 2 pi / 3: 0 = 2 fails
    assert teichmuller_residual([Corner(1, 2 * PI / 3), Corner(1, 2 * PI / 3)]) == -2
    # rectangle of horizontal and vertical arcs through regular points
    assert teichmuller_residual([Corner(0, PI / 2)] * 4) == 0
    # a half-plane: one visit to the pole spanning one direction gap
    assert teichmuller_residual([Corner(None, k=1), Corner(1, 2 * PI / 3)]) == 0
    with pytest.raises(AngleSnapFailure):
        teichmuller_residual([Corner(1, math.radians(100))])


def test_teichmuller_on_strip_and_tree_faces():
    for a, th, snap in ((-2.5 + 0.7j, 0.0, None), (0.462j, PI / 4, 1e-2)):
        c = classify(a, th, snap=snap)
        for f in c.decomposition.faces:
            assert teichmuller_residual(c.graph, f) == 0


def test_non_planar_geometry_is_rejected():
    e1 = Edge(0, "-1", "inf", np.array([-1, 5 + 5j]), 0)
    e2 = Edge(1, "+1", "inf", np.array([1, -5 + 5j]), 1)
    with pytest.raises(NonPlanar):
        _check_planar([e1, e2], {"-1": -1, "+1": 1, "a": 3j})


def test_relabelings():
    sig = "+1:D0,+1:D3,-1:D1,-1~a,a:D2|strips=1|tree=0"
    assert relabel_sym2(relabel_sym2(sig)) == sig
    assert relabel_sym1(sig) == "+1:D4,+1~a,-1:D1,-1:D3,a:D0|strips=1|tree=0"


coords = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(coords, coords, st.floats(0, PI))
def test_random_parameters_decompose_into_five_half_planes(x, y, th):
    a = complex(x, y)
    if min(abs(a - 1), abs(a + 1)) < 1e-3:
        return
    c = classify(a, th, intervals=False)
    assert c.half_planes == 5
    assert c.strips in (0, 1, 2)
    assert c.strips == 2 - c.shorts
    for f in c.decomposition.faces:
        assert teichmuller_residual(c.graph, f) == 0


@settings(max_examples=25, deadline=None)
@given(coords, coords, st.floats(0, PI))
def test_symmetry_relabelings_hold(x, y, th):
    a = complex(x, y)
    if min(abs(a - 1), abs(a + 1)) < 1e-3:
        return
    s = classify(a, th, intervals=False).signature
    assert relabel_sym1(s) == classify(-a, th + PI / 2, intervals=False).signature
    assert relabel_sym2(s) == classify(-a.conjugate(), PI / 2 - th, intervals=False).signature


def _switch_point(a0, a1, th, s0):
    lo, hi = a0, a1
    while abs(hi - lo) > 1e-7:
        mid = 0.5 * (lo + hi)
        if classify(mid, th, intervals=False).signature == s0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("th,a0,a1", [
    (0.0, -2.5 + 0.7j, 2 + 1j),
    (0.0, -0.8 + 2j, 0.5 + 1j),
    (0.0, 1.3 + 2.6j, 1.3 + 2.2j),
    (PI / 4, -0.5 + 1.5j, 1 + 0.3j),
    (0.2318, -2 + 0.5j, 0.5 + 2j),
])
def test_signature_changes_only_on_curves(th, a0, a1):
    ts = np.linspace(0.0, 1.0, 41)
    pts = a0 + ts * (a1 - a0)
    sigs = [classify(z, th, intervals=False).signature for z in pts]
    changes = 0
    for z0, z1, s0, s1 in zip(pts, pts[1:], sigs, sigs[1:]):
        if s0 != s1:
            changes += 1
            z = _switch_point(z0, z1, th, s0)
            assert locate(z, th, tol=1e-5).on_curve, (z, s0, s1)
    assert changes >= 1
