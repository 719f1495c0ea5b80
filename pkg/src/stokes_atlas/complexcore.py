"""The cubic p_a(z) = (z - a)(z^2 - 1), square roots tracked along paths,
path quadrature of sqrt(p_a), and the three period functions.

Period functions (all with the straight segment as integration path):

    f_{+1}(a) = e^{i theta} int_{1}^{a}  sqrt(p_a)
              = i e^{i theta} (a-1)^2 int_0^1 sqrt(t(1-t)) sqrt(t(a-1)+2) dt
    f_{-1}(a) = e^{i theta} int_{-1}^{a} sqrt(p_a)
              = -e^{i theta} (a+1)^2 int_0^1 sqrt(t(1-t)) sqrt(2-t(a+1)) dt
    f_theta(a) = e^{i theta} int_{-1}^{1} sqrt(1-t^2) sqrt(a-t) dt

with principal square roots inside the reduced integrals. These choices make
f_{+1} analytic off ]-inf,-1], f_{-1} analytic off [1,inf[, f_theta analytic
off ]-inf,1], and give the mirror identity
f_{+1, pi/2-theta}(-conj a) = conj f_{-1, theta}(a).

The reduced integrals are evaluated in the angle variable t = (1-cos phi)/2
(or t = -cos phi), which turns the sqrt(t(1-t)) weight into sin^2 phi and
leaves a smooth integrand on [0, pi].
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (BoundaryRequired, BranchAmbiguity, DegenerateParameter,
                     NonConvergence, OnCut)

QUAD_TOL = 1e-10
ROOT_TOL = 1e-10

# Gauss-Kronrod 7/15 nodes on [-1, 1] (non-negative half, last entry is 0).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
# Gauss weights for the nodes _XGK[1], _XGK[3], _XGK[5], _XGK[7]
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

# full 15-point node/weight arrays, used by the numpy path integrator
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_W15 = np.zeros(15)
for _j, _w in zip((1, 3, 5), _WG[:3]):
    _G_W15[_j] = _w
    _G_W15[14 - _j] = _w
_G_W15[7] = _WG[3]
G_WEIGHTS = _G_W15

ZEROS_FIXED = (-1.0 + 0j, 1.0 + 0j)


def p(a, z):
    """p_a(z) = (z - a)(z^2 - 1); works elementwise on arrays."""
    return (z - a) * (z * z - 1.0)


def dp(a, z):
    return 3.0 * z * z - 2.0 * a * z - 1.0


@dataclass(frozen=True)
class CubicPolynomial:
    a: complex

    @property
    def zeros(self) -> tuple[complex, complex, complex]:
        return (-1.0 + 0j, 1.0 + 0j, complex(self.a))

    def __call__(self, z):
        return p(self.a, z)

    def derivative(self, z):
        return dp(self.a, z)


@dataclass(frozen=True)
class PathIntegral:
    value: complex
    error: float


def check_nondegenerate(a: complex) -> complex:
    a = complex(a)
    if a == 1.0 or a == -1.0:
        raise DegenerateParameter(f"a = {a} makes p_a a double-zero cubic")
    return a


# ---------------------------------------------------------------------------
# branch tracking
# ---------------------------------------------------------------------------

class BranchTracker:
    """Continue a root of p_a along a path by nearest-root selection.

    When the two candidate roots at the next point are nearly equidistant
    from the current root (within 10 %), the step is halved; if halving
    bottoms out the path is running through a zero and BranchAmbiguity is
    raised.
    """

    def __init__(self, a, z0, root0, max_halvings: int = 40):
        self.a = complex(a)
        z0 = complex(z0)
        root0 = complex(root0)
        pz = p(self.a, z0)
        if abs(root0 * root0 - pz) > ROOT_TOL * (1.0 + abs(pz)):
            raise ValueError("seed root does not square to p_a(z0)")
        self.reference_point = z0
        self.reference_root = root0
        self.point = z0
        self.root = root0
        self.max_halvings = max_halvings

    def _choose(self, z):
        r = cmath.sqrt(p(self.a, z))
        d1 = abs(r - self.root)
        d2 = abs(r + self.root)
        if abs(d1 - d2) < 0.1 * max(d1, d2):
            return None
        return r if d1 < d2 else -r

    def advance(self, z) -> complex:
        z = complex(z)
        stack = [z]
        depth = 0
        while stack:
            target = stack[-1]
            r = self._choose(target)
            if r is None:
                depth += 1
                if depth > self.max_halvings:
                    raise BranchAmbiguity(
                        f"root continuation ambiguous near {target}")
                stack.append(0.5 * (self.point + target))
                continue
            self.point = target
            self.root = r
            stack.pop()
            depth = 0
        return self.root


def sqrt_p_tracked(a, path, seed_root) -> np.ndarray:
    """Roots of p_a at the vertices of ``path``, continued from ``seed_root``."""
    pts = np.asarray(path, dtype=complex)
    tracker = BranchTracker(a, pts[0], seed_root)
    out = np.empty(len(pts), dtype=complex)
    out[0] = tracker.root
    for k in range(1, len(pts)):
        out[k] = tracker.advance(pts[k])
    return out


# ---------------------------------------------------------------------------
# general path quadrature
# ---------------------------------------------------------------------------

def _gk_adaptive(func, tol, max_panels=4000):
    """Adaptive Gauss-Kronrod on [0, 1] for a vectorized complex integrand."""
    stack = [(0.0, 1.0)]
    total = 0j
    err = 0.0
    panels = 0
    while stack:
        lo, hi = stack.pop()
        half = 0.5 * (hi - lo)
        x = lo + half * (GK_NODES + 1.0)
        fx = func(x)
        k = half * np.dot(GK_WEIGHTS, fx)
        g = half * np.dot(G_WEIGHTS, fx)
        e = abs(k - g)
        panels += 1
        if e <= tol * (hi - lo) or hi - lo < 1e-13:
            total += k
            err += e
        elif panels > max_panels:
            raise NonConvergence("path quadrature exceeded its panel budget")
        else:
            mid = lo + half
            stack.append((mid, hi))
            stack.append((lo, mid))
    return total, err


def _is_zero(z, zeros, tol=1e-14):
    for k, zz in enumerate(zeros):
        if abs(z - zz) <= tol * max(1.0, abs(zz)):
            return k
    return None


def _continue_product(zs, zref, rref, z):
    """Root at ``z`` from the root ``rref`` at ``zref`` along the straight
    segment, via the product of principal roots of (z - zeta)/(zref - zeta).
    Exact as long as no zero lies strictly inside the segment."""
    out = rref
    for zeta in zs:
        out = out * np.sqrt((z - zeta) / (zref - zeta))
    return out


def integrate_sqrt_p(a, path, seed_root, tol: float = QUAD_TOL,
                     seed_point=None) -> PathIntegral:
    """Integral of sqrt(p_a) along a polyline with a continuous branch.

    ``seed_root`` is the root at ``path[0]``, or at ``seed_point`` (a point on
    the first segment) when the path starts at a zero of p_a.
    Zeros of p_a may appear only as path endpoints; there the substitution
    z = z0 + w^2 removes the square-root singularity.
    """
    a = complex(a)
    zs = (-1.0 + 0j, 1.0 + 0j, a)
    pts = [complex(z) for z in path]
    if seed_point is not None:
        pts.insert(1, complex(seed_point))
        seed_index = 1
    else:
        seed_index = 0
    if _is_zero(pts[seed_index], zs) is not None:
        raise BranchAmbiguity("branch seed placed at a zero; pass seed_point")
    for k in range(1, len(pts) - 1):
        if _is_zero(pts[k], zs) is not None and k != seed_index:
            raise BranchAmbiguity("path passes through a zero of p_a")
    # split segments joining two zeros so each piece has a regular endpoint
    refined = [pts[0]]
    for k in range(1, len(pts)):
        if (_is_zero(pts[k - 1], zs) is not None
                and _is_zero(pts[k], zs) is not None):
            refined.append(0.5 * (pts[k - 1] + pts[k]))
            if seed_index >= k:
                seed_index += 1
        refined.append(pts[k])
    pts = refined
    seed = complex(seed_root)
    pz = p(a, pts[seed_index])
    if abs(seed * seed - pz) > ROOT_TOL * (1.0 + abs(pz)):
        raise ValueError("seed root does not square to p_a at the seed point")

    # roots at vertices, continued outward from the seed vertex
    roots = [None] * len(pts)
    roots[seed_index] = seed
    for k in range(seed_index + 1, len(pts)):
        roots[k] = _continue_product(zs, pts[k - 1], roots[k - 1], pts[k]) \
            if _is_zero(pts[k - 1], zs) is None else None
        if roots[k] is None:
            raise BranchAmbiguity("cannot continue a root through a zero")
    for k in range(seed_index - 1, -1, -1):
        roots[k] = _continue_product(zs, pts[k + 1], roots[k + 1], pts[k])

    n_seg = len(pts) - 1
    seg_tol = tol / max(1, n_seg)
    total = 0j
    err = 0.0
    for k in range(n_seg):
        za, zb = pts[k], pts[k + 1]
        if za == zb:
            continue
        start_zero = _is_zero(za, zs) is not None
        end_zero = _is_zero(zb, zs) is not None
        if start_zero:
            zref, rref = zb, roots[k + 1]
        else:
            zref, rref = za, roots[k]
        d = zb - za

        def integrand(s, za=za, d=d, zref=zref, rref=rref,
                      start_zero=start_zero, end_zero=end_zero):
            if start_zero:
                u, jac = s * s, 2.0 * s
            elif end_zero:
                u, jac = 1.0 - s * s, 2.0 * s
            else:
                u, jac = s, np.ones_like(s)
            z = za + u * d
            return _continue_product(zs, zref, rref, z) * jac * d

        v, e = _gk_adaptive(integrand, seg_tol)
        total += v
        err += e
    if err > tol:
        raise NonConvergence(f"path quadrature error {err:.2e} above {tol:.0e}")
    return PathIntegral(complex(total), float(err))


# ---------------------------------------------------------------------------
# period functions: compiled reduced integrals on [0, pi]
# ---------------------------------------------------------------------------

K_G, K_GP, K_H, K_HP, K_F, K_FP, K_R, K_I = range(8)


@njit(cache=True, nogil=True)
def _integrand(kind, a, phi):
    c = math.cos(phi)
    s = math.sin(phi)
    s2 = s * s
    if kind <= K_HP:
        t = 0.5 * (1.0 - c)
        if kind == K_G:
            return 0.25 * s2 * cmath.sqrt(t * (a - 1.0) + 2.0)
        if kind == K_GP:
            return 0.125 * s2 * t / cmath.sqrt(t * (a - 1.0) + 2.0)
        if kind == K_H:
            return 0.25 * s2 * cmath.sqrt(2.0 - t * (a + 1.0))
        return -0.125 * s2 * t / cmath.sqrt(2.0 - t * (a + 1.0))
    if kind == K_F:
        return s2 * cmath.sqrt(a + c)
    if kind == K_FP:
        return 0.5 * s2 / cmath.sqrt(a + c)
    sr = a.real
    if kind == K_R:
        h = 0.5 * (sr + 1.0)
        u = 0.5 * (sr - 1.0) - h * c
        return complex(h * h * s2 * math.sqrt(max(1.0 - u, 0.0)), 0.0)
    h = 0.5 * (1.0 - sr)
    u = 0.5 * (sr + 1.0) - h * c
    return complex(h * h * s2 * math.sqrt(max(1.0 + u, 0.0)), 0.0)


@njit(cache=True, nogil=True)
def _gk15(kind, a, lo, hi, xgk, wgk, wg):
    half = 0.5 * (hi - lo)
    mid = lo + half
    fc = _integrand(kind, a, mid)
    k = wgk[7] * fc
    g = wg[3] * fc
    for j in range(7):
        dx = half * xgk[j]
        f1 = _integrand(kind, a, mid - dx)
        f2 = _integrand(kind, a, mid + dx)
        k += wgk[j] * (f1 + f2)
        if j % 2 == 1:
            g += wg[j // 2] * (f1 + f2)
    return k * half, abs((k - g) * half)


@njit(cache=True, nogil=True)
def _adaptive(kind, a, rel, xgk, wgk, wg):
    lo0 = 0.0
    hi0 = math.pi
    v0, e0 = _gk15(kind, a, lo0, hi0, xgk, wgk, wg)
    tol = 1e-15 + rel * abs(v0)
    nmax = 400
    los = np.empty(nmax)
    his = np.empty(nmax)
    los[0] = lo0
    his[0] = hi0
    n = 1
    total = 0j
    err = 0.0
    ok = True
    processed = 0
    while n > 0:
        n -= 1
        lo = los[n]
        hi = his[n]
        v, e = _gk15(kind, a, lo, hi, xgk, wgk, wg)
        processed += 1
        if e <= tol * (hi - lo) / (hi0 - lo0) or hi - lo < 1e-12:
            total += v
            err += e
        elif n + 2 > nmax or processed > 20000:
            total += v
            err += e
            ok = False
        else:
            mid = 0.5 * (lo + hi)
            los[n] = mid
            his[n] = hi
            los[n + 1] = lo
            his[n + 1] = mid
            n += 2
    return total, err, ok


_REL = 1e-13


def _reduced(kind, a):
    v, e, ok = _adaptive(kind, complex(a), _REL, _XGK, _WGK, _WG)
    if not ok and e > QUAD_TOL * max(1.0, abs(v)):
        raise NonConvergence(f"reduced integral {kind} did not converge at a={a}")
    return v


def _on_cut(a: complex, which: int) -> bool:
    if a.imag != 0.0:
        return False
    return a.real <= -1.0 if which == 1 else a.real >= 1.0


def f_pm1(a, theta, which: int) -> complex:
    """f_{+1,theta}(a) (which=+1) or f_{-1,theta}(a) (which=-1)."""
    a = complex(a)
    if which not in (1, -1):
        raise ValueError("which must be +1 or -1")
    if a == which:
        return 0j
    if _on_cut(a, which):
        raise OnCut(f"a = {a} lies on the cut of f_{which:+d}")
    eth = cmath.exp(1j * theta)
    if which == 1:
        return 1j * eth * (a - 1.0) ** 2 * _reduced(K_G, a)
    return -eth * (a + 1.0) ** 2 * _reduced(K_H, a)


def f_pm1_with_derivative(a, theta, which: int) -> tuple[complex, complex]:
    """(f, df/da) for f_{+1,theta} or f_{-1,theta}."""
    a = complex(a)
    if _on_cut(a, which):
        raise OnCut(f"a = {a} lies on the cut of f_{which:+d}")
    eth = cmath.exp(1j * theta)
    if which == 1:
        g = _reduced(K_G, a)
        gp = _reduced(K_GP, a)
        b = a - 1.0
        return 1j * eth * b * b * g, 1j * eth * (2.0 * b * g + b * b * gp)
    h = _reduced(K_H, a)
    hp = _reduced(K_HP, a)
    b = a + 1.0
    return -eth * b * b * h, -eth * (2.0 * b * h + b * b * hp)


def on_segment(a) -> bool:
    a = complex(a)
    return a.imag == 0.0 and -1.0 <= a.real <= 1.0


def boundary_parts(s: float) -> tuple[float, float]:
    """(R, I) with R = int_{-1}^{s} sqrt|p_s| and I = int_{s}^{1} sqrt|p_s|.

    The upper boundary value of int_{-1}^{1} sqrt(1-t^2) sqrt(a-t) dt at
    a = s is R + iI, the lower one R - iI.
    """
    s = float(s)
    if not -1.0 <= s <= 1.0:
        raise ValueError("s must lie in [-1, 1]")
    r = _reduced(K_R, complex(s)).real
    i = _reduced(K_I, complex(s)).real
    return r, i


def f_segment(a, theta, boundary: str = "off") -> complex:
    """f_theta(a) = e^{i theta} int_{-1}^{1} sqrt(p_a).

    ``boundary`` is "off" for a outside [-1, 1], and "+" or "-" for the
    boundary value from the upper or lower half-plane when a is on [-1, 1].
    """
    a = complex(a)
    eth = cmath.exp(1j * theta)
    if on_segment(a):
        if boundary not in ("+", "-"):
            raise BoundaryRequired(f"a = {a} is on [-1, 1]; choose '+' or '-'")
        r, i = boundary_parts(a.real)
        return eth * complex(r, i if boundary == "+" else -i)
    if boundary != "off":
        raise ValueError("boundary values exist only for a in [-1, 1]")
    if _hugs_segment(a):
        return f_segment_with_derivative(a, theta)[0]
    return eth * _reduced(K_F, a)


def _hugs_segment(a: complex) -> bool:
    return -1.0 < a.real < 1.0 and 0.0 < abs(a.imag) < 0.2


def f_segment_with_derivative(a, theta) -> tuple[complex, complex]:
    a = complex(a)
    if on_segment(a):
        raise BoundaryRequired(f"a = {a} is on [-1, 1]")
    if _hugs_segment(a):
        # f_theta = -f_{-1} + sign(Im a) f_{+1}; these integrands stay smooth
        # while the direct one is nearly singular close to ]-1, 1[
        sg = 1.0 if a.imag > 0 else -1.0
        fm, dm = f_pm1_with_derivative(a, theta, -1)
        fp, dpp = f_pm1_with_derivative(a, theta, 1)
        return -fm + sg * fp, -dm + sg * dpp
    eth = cmath.exp(1j * theta)
    return eth * _reduced(K_F, a), eth * _reduced(K_FP, a)


def period(a, theta, family) -> complex:
    """Dispatch on family: +1, -1 or 'theta'."""
    if family == "theta":
        return f_segment(a, theta)
    return f_pm1(a, theta, int(family))


def period_with_derivative(a, theta, family) -> tuple[complex, complex]:
    if family == "theta":
        return f_segment_with_derivative(a, theta)
    return f_pm1_with_derivative(a, theta, int(family))
