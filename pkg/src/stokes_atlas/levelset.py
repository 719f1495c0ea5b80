"""Zero sets of Re f_{+1}, Re f_{-1} and Re f_theta in the parameter plane.

Curves are traced by predictor-corrector continuation: the predictor steps
along i * conj(f'), which is tangent to {Re f = 0}, and the corrector is a
Newton iteration on Re f along the gradient conj(f'). The special points
t (tree summit), e (second crossing of the left branches, only for small
theta) and s (real endpoint of the f_theta curve) are solved from seeds
produced by the traces.

Branch names. Rays from +1 leave along (-theta + k pi)/2 and rays from -1
along (-2 theta + (2k+1) pi)/4, k = 0..3:

    "+1:lo-r" k=0   "+1:r" k=1   "+1:l" k=2   "+1:lo-l" k=3
    "-1:r"    k=0   "-1:l" k=1   "-1:lo-l" k=2 "-1:lo-r" k=3
    "theta"   the f_theta curve, from s to infinity
"""
from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import polygonize, unary_union
from skimage.draw import line as raster_line

from .complexcore import (boundary_parts, f_segment, on_segment, period,
                          period_with_derivative)
from .errors import (BoundaryRequired, CriticalPointHit, DegenerateParameter,
                     InconsistentArrangement, NonConvergence, OnCut,
                     OutOfWorld, StallDetected)

TWO_PI = 2.0 * math.pi

BRANCHES = {
    "+1:lo-r": (1, 0), "+1:r": (1, 1), "+1:l": (1, 2), "+1:lo-l": (1, 3),
    "-1:r": (-1, 0), "-1:l": (-1, 1), "-1:lo-l": (-1, 2), "-1:lo-r": (-1, 3),
}
FAMILY_NAMES = {1: "S+1", -1: "S-1", "theta": "S_theta"}

ARCTAN_HALF_HALF = 0.5 * math.atan(0.5)


@dataclass(frozen=True)
class LevelCurve:
    branch: str
    family: object          # +1, -1 or "theta"
    theta: float
    points: np.ndarray = field(repr=False)
    start_tag: str
    end_tag: str
    end_direction: int | None = None
    step_bound: float = 0.05

    def residuals(self) -> np.ndarray:
        out = []
        for v in self.points:
            if self.family == "theta" and on_segment(v):
                out.append(abs(f_segment(v.real, self.theta, "+").real))
            elif isinstance(self.family, int) and v == self.family:
                out.append(0.0)
            else:
                out.append(abs(period(v, self.theta, self.family).real))
        return np.array(out)


@dataclass(frozen=True)
class SpecialPoints:
    theta: float
    t: complex
    e: complex | None
    s: float


def launch_angles_at_zero(theta, which) -> list[float]:
    """Initial tangent directions of the Re f_{which} = 0 curves at a = which."""
    if which == 1:
        return [(-theta + k * math.pi) / 2.0 for k in range(4)]
    if which == -1:
        return [(-2.0 * theta + (2 * k + 1) * math.pi) / 4.0 for k in range(4)]
    raise ValueError("which must be +1 or -1")


def divergence_index(a, theta) -> int:
    """k with arg a nearest to (-2 theta + 2 k pi)/5."""
    return int(round((5.0 * cmath.phase(a) + 2.0 * theta) / TWO_PI)) % 5


# ---------------------------------------------------------------------------
# tracing
# ---------------------------------------------------------------------------

def _tol(f: complex) -> float:
    return max(1e-10, 1e-14 * abs(f))


def correct(a, theta, family, max_iter: int = 12):
    """Newton on Re f along its gradient; returns (a, f, f')."""
    for _ in range(max_iter):
        f, df = period_with_derivative(a, theta, family)
        if abs(f.real) <= _tol(f):
            return a, f, df
        g = abs(df) ** 2
        if g < 1e-300:
            raise CriticalPointHit(f"vanishing derivative at a={a}")
        a = a - f.real * df.conjugate() / g
    f, df = period_with_derivative(a, theta, family)
    if abs(f.real) <= _tol(f):
        return a, f, df
    raise NonConvergence(f"level-set corrector failed at a={a}")


def _crosses_cut(family, a0, a1) -> bool:
    if family == 1:
        return a0.imag * a1.imag <= 0 and min(a0.real, a1.real) < -1.0 \
            and (a0.imag != 0 or a1.imag != 0)
    if family == -1:
        return a0.imag * a1.imag <= 0 and max(a0.real, a1.real) > 1.0 \
            and (a0.imag != 0 or a1.imag != 0)
    return a0.imag * a1.imag < 0


def _trace(theta, family, a_start, tau0, step, r_world, stop=None,
           relative_cap=False, h0=1e-3, max_length=None, focus=()):
    """Continue {Re f = 0} from a_start (already on the curve) along tau0."""
    max_length = max_length or 40.0 * r_world
    a, f, df = correct(a_start, theta, family)
    pts = [a]
    tau_prev = tau0 / abs(tau0)
    h = h0
    length = 0.0
    other = -family if isinstance(family, int) else None
    while True:
        tau = 1j * df.conjugate() / abs(df)
        if (tau * tau_prev.conjugate()).real < 0:
            tau = -tau
        cap = step * max(1.0, abs(a) / 2.0) if relative_cap else step
        # near -1 and +1 the curves bunch together; resolve them locally
        near = min(abs(a - 1.0), abs(a + 1.0))
        for q in focus:
            near = min(near, abs(a - q))
        cap = min(cap, max(2e-5, 0.1 * near))
        h = min(h, cap)
        while True:
            try:
                a_new, f_new, df_new = correct(a + h * tau, theta, family,
                                               max_iter=6)
                tau_new = 1j * df_new.conjugate() / abs(df_new)
                turn = abs((tau_new * tau.conjugate()).imag)
                ok = (abs(a_new - (a + h * tau)) < 0.3 * h and turn < 0.3
                      and not _crosses_cut(family, a, a_new))
            except (NonConvergence, OnCut):
                ok = False
            if ok:
                break
            if isinstance(family, int) and _crosses_cut(family, a, a + h * tau) \
                    and h < 1e-6:
                return np.array(pts), "cut", None
            h *= 0.5
            if h < 1e-12:
                raise CriticalPointHit(f"step collapsed tracing near a={a}")
        length += abs(a_new - a)
        # only at theta = 0 does a branch (along ]-1, 1[) run into the other zero
        if other is not None and theta == 0.0 and abs(a_new - other) < 2.0 * h:
            pts.append(complex(other))
            return np.array(pts), f"zero:{other:+d}", None
        pts.append(a_new)
        if stop is not None and stop(a, a_new):
            return np.array(pts), "stop", None
        a, f, df, tau_prev = a_new, f_new, df_new, tau
        if abs(a) >= r_world:
            return np.array(pts), "infinity", divergence_index(a, theta)
        if length > max_length:
            raise StallDetected(f"arc length budget exhausted at a={a}")
        h = min(1.5 * h, cap)


def trace_level_curve(theta, branch, step=0.05, R_world=50.0, stop=None,
                      relative_cap=False, focus=()) -> LevelCurve:
    """Trace one branch ("+1:l", "-1:r", ..., or "theta") out to |a| = R_world.

    Steps shrink near -1, +1 and the points in ``focus``."""
    theta = float(theta)
    if branch == "theta":
        return _trace_theta_curve(theta, step, R_world, stop, focus)
    family, k = BRANCHES[branch]
    angle = launch_angles_at_zero(theta, family)[k]
    zc = complex(family)
    tau = cmath.exp(1j * angle)
    seed = zc + 1e-3 * tau
    pts, tag, kdir = _trace(theta, family, seed, tau, step, R_world, stop,
                            relative_cap, focus=focus)
    pts = np.concatenate([[zc], pts])
    return LevelCurve(branch, family, theta, pts, f"zero:{family:+d}", tag,
                      kdir, step)


def _trace_theta_curve(theta, step, r_world, stop, focus=()) -> LevelCurve:
    s = find_s(theta)
    if theta == 0.0:
        # the f_0 curve is the real half-line ]-inf, -1]
        n = int(math.ceil(r_world / step)) + 2
        pts = -1.0 - np.linspace(0.0, r_world + step, n) + 0j
        return LevelCurve("theta", "theta", 0.0, pts, "s", "infinity", None, step)
    # tangent at s from the boundary values R + iI, differentiated along ]-1, 1[
    h = 1e-6 * min(1.0, 1.0 - abs(s)) if abs(s) < 1.0 else 0.0
    if h > 0.0:
        r1, i1 = boundary_parts(s + h)
        r0, i0 = boundary_parts(s - h)
        dfs = cmath.exp(1j * theta) * complex(r1 - r0, i1 - i0) / (2.0 * h)
        tau = 1j * dfs.conjugate() / abs(dfs)
        if tau.imag < 0:
            tau = -tau
    else:
        tau = 1j
    seed = s + 1e-3 * tau
    pts, tag, _ = _trace(theta, "theta", seed, tau, step, r_world, stop,
                         focus=focus)
    pts = np.concatenate([[complex(s, 0.0)], pts])
    kdir = None
    return LevelCurve("theta", "theta", theta, pts, "s", tag, kdir, step)


# ---------------------------------------------------------------------------
# special points
# ---------------------------------------------------------------------------

def find_s(theta) -> float:
    """Real s in [-1, 1] with Re(e^{i theta}(R(s) + i I(s))) = 0 by bisection."""
    theta = float(theta)
    if not 0.0 <= theta <= math.pi / 2 + 1e-15:
        raise ValueError("theta must lie in [0, pi/2]")
    c, sn = math.cos(theta), math.sin(theta)

    def g(x):
        r, i = boundary_parts(x)
        return r * c - i * sn

    lo, hi = -1.0, 1.0
    if g(lo) >= 0.0:
        return lo
    if g(hi) <= 0.0:
        return hi
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton2(theta, a, max_iter=40):
    """2D Newton for Re f_{+1} = Re f_{-1} = 0 starting at a."""
    for _ in range(max_iter):
        f1, d1 = period_with_derivative(a, theta, 1)
        f2, d2 = period_with_derivative(a, theta, -1)
        jac = np.array([[d1.real, -d1.imag], [d2.real, -d2.imag]])
        rhs = -np.array([f1.real, f2.real])
        dx = np.linalg.solve(jac, rhs)
        a = a + complex(dx[0], dx[1])
        if math.hypot(dx[0], dx[1]) < 1e-14 * max(1.0, abs(a)):
            break
    r1 = abs(period(a, theta, 1).real)
    r2 = abs(period(a, theta, -1).real)
    return a, max(r1, r2)


def _sign_change_stop(theta, family):
    def stop(a0, a1):
        try:
            return (period(a0, theta, family).real
                    * period(a1, theta, family).real) <= 0.0
        except OnCut:
            return False
    return stop


def _interpolated_crossing(theta, family, a0, a1):
    v0 = period(a0, theta, family).real
    v1 = period(a1, theta, family).real
    w = v0 / (v0 - v1) if v0 != v1 else 0.5
    return a0 + w * (a1 - a0)


def find_t(theta) -> complex:
    """Tree summit t: intersection of the left branch from +1 and the right
    branch from -1 in the closed upper half-plane."""
    theta = float(theta)
    if not 0.0 <= theta <= math.pi / 4 + 1e-15:
        raise ValueError("theta must lie in [0, pi/4]")
    if theta == 0.0:
        return -1.0 + 0j
    seeds = []
    for branch, other in (("+1:l", -1), ("-1:r", 1)):
        try:
            c = trace_level_curve(theta, branch, R_world=10.0,
                                  stop=_sign_change_stop(theta, other))
        except NonConvergence:
            continue
        if c.end_tag == "stop":
            seeds.append(_interpolated_crossing(theta, other, c.points[-2],
                                                c.points[-1]))
    tried = []
    for seed in seeds:
        try:
            a, res = _newton2(theta, seed)
        except (NonConvergence, OnCut, np.linalg.LinAlgError):
            tried.append(seed)
            continue
        if res < 1e-8 and -1.0 - 1e-9 <= a.real <= 1e-9 and a.imag >= -1e-12:
            return complex(a.real, max(a.imag, 0.0))
        tried.append(seed)
    if theta < 1e-3:
        return -1.0 + 0j     # near-tangent regime: report the limit point
    raise NonConvergence(f"t not found for theta={theta}; seeds tried: {tried}")


def find_e(theta, search_radius: float = 1e4) -> complex | None:
    """Second crossing e of the two left branches (Re e <= -1), or None.

    The left branch from -1 is followed out to ``search_radius`` looking for
    a sign change of Re f_{+1}; a crossing farther out is reported absent.
    """
    theta = float(theta)
    if not 0.0 <= theta <= math.pi / 4 + 1e-15:
        raise ValueError("theta must lie in [0, pi/4]")
    if theta == 0.0:
        return -1.0 + 0j
    stop_plain = _sign_change_stop(theta, 1)

    def stop(a0, a1):
        return a1.real < -1.0 and a0.real < -1.0 and stop_plain(a0, a1)

    try:
        c = trace_level_curve(theta, "-1:l", R_world=search_radius, stop=stop,
                              relative_cap=True)
    except NonConvergence:
        return None
    if c.end_tag != "stop":
        return None
    seed = _interpolated_crossing(theta, 1, c.points[-2], c.points[-1])
    try:
        a, res = _newton2(theta, seed)
    except (NonConvergence, OnCut, np.linalg.LinAlgError):
        return None
    if res < 1e-8 * max(1.0, abs(a) ** 2.5) and a.real <= -1.0 and a.imag >= 0.0:
        return complex(a)
    return None


@lru_cache(maxsize=64)
def special_points(theta: float) -> SpecialPoints:
    return SpecialPoints(float(theta), find_t(theta), find_e(theta), find_s(theta))


# ---------------------------------------------------------------------------
# theta reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Reduction:
    """How (a, theta) maps to (a', theta') with theta' in [0, pi/4].

    ``ops`` lists the symmetries applied in order: "rot" is
    (a, theta) -> (-a, theta - pi/2) and "mirror" is
    (a, theta) -> (-conj a, pi/2 - theta). Each swaps -1 and +1.
    """
    a: complex
    theta: float
    ops: tuple[str, ...]

    @property
    def swaps_zeros(self) -> bool:
        return len(self.ops) % 2 == 1


def reduce_theta(a, theta) -> Reduction:
    a = complex(a)
    th = float(theta) % math.pi          # the differential depends on e^{2 i theta}
    ops = []
    if th >= math.pi / 2:
        a, th = -a, th - math.pi / 2
        ops.append("rot")
    if th > math.pi / 4:
        a, th = -a.conjugate(), math.pi / 2 - th
        ops.append("mirror")
    return Reduction(a, th, tuple(ops))


# ---------------------------------------------------------------------------
# region maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Location:
    kind: str                    # region, on-S+1, on-S-1, on-S_theta, at-t, at-e
    region: int | None = None

    @property
    def on_curve(self) -> bool:
        return self.kind != "region"

    def __str__(self):
        return f"region:{self.region}" if self.kind == "region" else self.kind


def _insert_point(pts: np.ndarray, q: complex, tol: float):
    """Insert q as a vertex at the nearest polyline segment; return
    (points, index) or (pts, None) if q is farther than tol."""
    a = pts[:-1]
    b = pts[1:]
    d = b - a
    dd = np.abs(d) ** 2
    u = np.clip(np.where(dd > 0, ((q - a) * d.conjugate()).real / np.where(dd > 0, dd, 1), 0.0), 0.0, 1.0)
    proj = a + u * d
    dist = np.abs(proj - q)
    j = int(np.argmin(dist))
    if dist[j] > tol:
        return pts, None
    if abs(pts[j] - q) <= 1e-12:
        return pts, j
    if abs(pts[j + 1] - q) <= 1e-12:
        return pts, j + 1
    return np.concatenate([pts[:j + 1], [q], pts[j + 1:]]), j + 1


def _compress(z: np.ndarray, scale: float) -> np.ndarray:
    r = np.abs(z)
    return np.where(r > 0, z / np.where(r > 0, r, 1.0) * (r / (r + scale)), 0j)


@dataclass(frozen=True)
class RegionMap:
    theta: float
    special: SpecialPoints
    curves: tuple[LevelCurve, ...]
    regions: tuple[Polygon, ...] = field(repr=False)
    raster_counts: tuple[int, ...]
    r_world: float

    @property
    def raster_resolves(self) -> bool:
        """True when the stable raster count equals the face count (regions
        thinner than a raster cell, e.g. near theta = pi/8, make it False)."""
        return bool(self.raster_counts) and self.raster_counts[-1] == self.n

    @property
    def n(self) -> int:
        return len(self.regions)

    def region_of(self, a) -> int:
        pt = Point(complex(a).real, complex(a).imag)
        for i, poly in enumerate(self.regions):
            if poly.covers(pt):
                return i
        dist = [poly.distance(pt) for poly in self.regions]
        return int(np.argmin(dist))

    def locate(self, a, tol: float = 1e-6, gate: float = 0.05) -> Location:
        a = complex(a)
        if a in (1.0, -1.0):
            raise DegenerateParameter("a must differ from -1 and +1")
        if abs(a) > self.r_world:
            raise OutOfWorld(f"|a| = {abs(a):.3g} exceeds {self.r_world}")
        sp = self.special
        if abs(a - sp.t) <= tol:
            return Location("at-t")
        if sp.e is not None and abs(a - sp.e) <= tol:
            return Location("at-e")
        pt = Point(a.real, a.imag)
        for curve in self.curves:
            line = LineString(np.column_stack([curve.points.real, curve.points.imag]))
            if line.distance(pt) > max(tol, gate):
                continue
            fam = curve.family
            try:
                if fam == "theta" and on_segment(a):
                    f = f_segment(a, self.theta, "+")
                    df = 1.0
                else:
                    f, df = period_with_derivative(a, self.theta, fam)
            except OnCut:
                continue
            if abs(f.real) <= tol * max(1.0, abs(df)):
                # the Newton foot must itself lie on this trimmed curve
                foot = a - f.real * np.conj(df) / max(abs(df) ** 2, 1e-300)
                if line.distance(Point(foot.real, foot.imag)) <= max(tol, gate):
                    return Location(f"on-{FAMILY_NAMES[fam]}")
        return Location("region", self.region_of(a))


def _trimmed_curves(theta, sp: SpecialPoints, step, r_world):
    specials = [sp.t] + ([sp.e] if sp.e is not None else [])
    focus = tuple(q for q in specials if q not in (1.0, -1.0))
    curves = [trace_level_curve(theta, b, step=step, R_world=r_world, focus=focus)
              for b in BRANCHES]
    sig = trace_level_curve(theta, "theta", step=step, R_world=r_world,
                            focus=focus)
    out = []
    for c in curves + [sig]:
        pts = c.points
        idx = {}
        for name, q in zip(("t", "e"), specials):
            if q in (1.0, -1.0):
                continue
            # curves through q pass within the chord error, which the focused
            # step control keeps far below the distance to other features
            feature = min([abs(q - 1.0), abs(q + 1.0)]
                          + [abs(q - o) for o in specials if o != q])
            pts, j = _insert_point(pts, q, tol=min(1e-3, 0.05 * feature))
            if j is not None:
                idx[name] = j
        start, end_tag = c.start_tag, c.end_tag
        if c.branch == "theta" and theta > 0.0:
            j = idx.get("t")
            if j is None:
                raise InconsistentArrangement("f_theta curve misses t")
            pts = pts[j:]
            start = "t"
        if c.branch == "+1:l" and sp.e is not None and theta > 0.0:
            j = idx.get("e")
            if j is None:
                raise InconsistentArrangement("left branch from +1 misses e")
            pts = pts[:j + 1]
            end_tag = "e"
        out.append(LevelCurve(c.branch, c.family, theta, pts, start, end_tag,
                              c.end_direction if end_tag == "infinity" else None,
                              step))
    return out


def sigma_curves(theta, step: float = 0.05, R_world: float = 50.0) -> list[LevelCurve]:
    """Untrimmed branches of the three zero-level sets at theta in [0, pi/4]."""
    theta = float(theta)
    sp = special_points(theta)
    focus = tuple(q for q in (sp.t, sp.e) if q is not None and q not in (1.0, -1.0))
    return ([trace_level_curve(theta, b, step=step, R_world=R_world, focus=focus)
             for b in BRANCHES]
            + [trace_level_curve(theta, "theta", step=step, R_world=R_world, focus=focus)])


def _polygon_regions(curves, r_world):
    """Faces of the noded arrangement inside the disk, plus the Euler count
    E - V + 1 of bounded faces computed from the same noding."""
    ang = np.linspace(0.0, TWO_PI, 2049)[:-1]
    disk = Polygon(np.column_stack([r_world * np.cos(ang), r_world * np.sin(ang)]))
    # curves run past the circle, so every crossing with it is a proper one;
    # the parts outside are cut away before counting
    lines = [disk.exterior]
    for c in curves:
        lines.append(LineString(np.column_stack([c.points.real, c.points.imag])))
    merged = unary_union(lines)
    inside = disk.buffer(1e-7)
    edges = [g for g in getattr(merged, "geoms", [merged]) if inside.covers(g)]
    nodes = set()
    for g in edges:
        for x, y in (g.coords[0], g.coords[-1]):
            nodes.add((x, y))
    euler = len(edges) - len(nodes) + 1
    polys = [p for p in polygonize(edges) if p.area > 1e-9]
    reps = [p.representative_point() for p in polys]
    order = sorted(range(len(polys)), key=lambda i: (round(reps[i].x, 6), round(reps[i].y, 6)))
    return tuple(polys[i] for i in order), euler


def raster_region_count(curves, r_world, n, scale=2.0, center=0j,
                        min_cells=None) -> int:
    """Connected components of the complement of the curves inside the disk,
    by flood fill on an n x n grid in coordinates compressed radially about
    ``center`` (cells are smallest there, about 2 * scale / n wide)."""
    min_cells = min_cells if min_cells is not None else max(4, n * n // 40000)
    walls = np.zeros((n, n), dtype=bool)
    for c in curves:
        pts = c.points - center
        # densify so that consecutive raster points are adjacent
        u = _compress(pts, scale)
        seg = np.abs(np.diff(u)) * n / 2.0
        reps = np.maximum(1, np.ceil(seg * 2).astype(int))
        dense = [pts[:1]]
        for k in range(len(pts) - 1):
            s = np.arange(1, reps[k] + 1) / reps[k]
            dense.append(pts[k] + s * (pts[k + 1] - pts[k]))
        u = _compress(np.concatenate(dense), scale)
        ix = np.clip(((u.real + 1.0) * 0.5 * (n - 1)).round().astype(int), 0, n - 1)
        iy = np.clip(((u.imag + 1.0) * 0.5 * (n - 1)).round().astype(int), 0, n - 1)
        for k in range(len(ix) - 1):
            rr, cc = raster_line(iy[k], ix[k], iy[k + 1], ix[k + 1])
            walls[rr, cc] = True
    g = np.linspace(-1.0, 1.0, n)
    gx, gy = np.meshgrid(g, g)
    # invert the compression to test membership in the world disk
    ru = np.hypot(gx, gy)
    r = np.where(ru < 1.0, scale * ru / np.maximum(1.0 - ru, 1e-300), np.inf)
    zc = np.where(ru > 0, (gx + 1j * gy) / np.where(ru > 0, ru, 1.0), 0) * r + center
    inside = np.abs(zc) < r_world * (1.0 - 0.02)
    free = inside & ~walls
    labels, count = ndimage.label(free)
    sizes = np.bincount(labels.ravel())[1:]
    return int(np.sum(sizes >= min_cells))


_MAP_LOCK = threading.Lock()
_MAP_CACHE: dict = {}


def build_region_map(theta, step: float = 0.05, R_world: float = 50.0,
                     raster: tuple[int, ...] = (600, 1200)) -> RegionMap:
    """Trimmed curve sets and the regions of their complement in |a| <= R_world.

    Regions come from polygonizing the noded curve arrangement; the count is
    cross-checked by flood fill at each raster resolution.
    """
    theta = float(theta)
    if not 0.0 <= theta <= math.pi / 4 + 1e-15:
        raise ValueError("theta must lie in [0, pi/4]")
    key = (theta, step, R_world, tuple(raster))
    with _MAP_LOCK:
        if key in _MAP_CACHE:
            return _MAP_CACHE[key]
    sp = special_points(theta)
    curves = _trimmed_curves(theta, sp, step, R_world)
    regions, euler = _polygon_regions(curves, R_world)
    if euler != len(regions):
        raise InconsistentArrangement(
            f"theta={theta}: {len(regions)} faces but Euler count {euler}")
    feature = 1.0
    if theta > 0.0:
        feats = [abs(sp.t + 1.0)] + ([abs(sp.e + 1.0), abs(sp.e - sp.t)]
                                     if sp.e is not None else [])
        feature = min(feats)
    scale = float(np.clip(0.5 * feature, 0.01, 1.0))
    counts = ()
    if raster:
        # refine until two consecutive resolutions agree
        n = raster[0]
        counts = (raster_region_count(curves, R_world, n, scale, -1.0 + 0j),)
        for n in list(raster[1:]) + [2 * raster[-1], 4 * raster[-1]]:
            counts += (raster_region_count(curves, R_world, n, scale, -1.0 + 0j),)
            if counts[-1] == counts[-2] and len(counts) >= len(raster):
                break
        if counts[-1] != counts[-2]:
            raise InconsistentArrangement(
                f"raster region count unstable under refinement at theta={theta}: "
                f"{counts}")
    rm = RegionMap(theta, sp, tuple(curves), regions, counts, R_world)
    with _MAP_LOCK:
        _MAP_CACHE[key] = rm
    return rm


def locate(a, theta, tol: float = 1e-6, region_map: RegionMap | None = None) -> Location:
    """Region id or on-curve verdict for a at theta (reduced to [0, pi/4])."""
    red = reduce_theta(a, theta)
    rm = region_map if region_map is not None else build_region_map(red.theta)
    loc = rm.locate(red.a, tol)
    if red.swaps_zeros and loc.kind in ("on-S+1", "on-S-1"):
        loc = Location("on-S-1" if loc.kind == "on-S+1" else "on-S+1")
    return loc


def snap_to_xi(a, theta, tol: float = 1e-2, region_map: RegionMap | None = None):
    """Nearest point of the trimmed curve set within ``tol`` of a (theta in
    [0, pi/4]), found by Newton projection; returns None when there is none."""
    a = complex(a)
    rm = region_map if region_map is not None else build_region_map(theta)
    sp = rm.special
    # curve intersections win: projecting onto one curve would miss the other
    near = [(abs(q - a), q) for q in (sp.t, sp.e) if q is not None and abs(q - a) <= tol]
    if near:
        return complex(min(near)[1])
    best = None
    for fam in (1, -1, "theta"):
        b = a
        try:
            for _ in range(30):
                f, df = period_with_derivative(b, theta, fam)
                step = f.real * np.conj(df) / abs(df) ** 2
                b = b - step
                if abs(step) < 1e-15 * max(1.0, abs(b)):
                    break
        except (OnCut, BoundaryRequired, NonConvergence):
            continue
        d = abs(b - a)
        if d > tol or b in (1.0, -1.0):
            continue
        loc = rm.locate(b, tol=1e-9)
        if loc.on_curve and (best is None or d < best[0]):
            best = (d, complex(b))
    return None if best is None else best[1]
