"""Critical graph assembly, Jenkins domain decomposition and signatures.

The graph lives on the sphere: the three finite zeros plus a single vertex
at infinity where every escaping ray ends. Faces come from a rotation system
(darts sorted by launch angle at each zero, by argument of the far endpoint
at infinity) and are traced keeping the face on the left. A face touching
infinity once between consecutive critical directions is a half-plane
domain; a face touching it twice, each time inside one direction, is a strip.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from shapely.geometry import LineString, Point, Polygon
from shapely.validation import make_valid

from .errors import (AngleSnapFailure, FaceClassificationAmbiguous,
                     InconsistentArrangement, NonPlanar)
from .trajectory import (ZERO_LABELS, RaySystem, ShortTrajectoryCertificate,
                         TraceSettings, all_critical_rays, zeros_of)

TWO_PI = 2.0 * math.pi
INF = "inf"
SNAP_DEG = 5.0


@dataclass(frozen=True)
class Edge:
    id: int
    u: str                      # zero label the geometry starts at
    v: str                      # zero label or "inf"
    points: np.ndarray = field(repr=False)
    direction: int | None = None

    @property
    def short(self) -> bool:
        return self.v != INF

    @property
    def label(self) -> str:
        if self.short:
            x, y = sorted((self.u, self.v), key=ZERO_LABELS.index)
            return f"{x}~{y}"
        return f"{self.u}:D{self.direction}"


@dataclass(frozen=True)
class StokesGraph:
    a: complex
    theta: float
    edges: tuple[Edge, ...]
    # vertex -> darts (edge id, end) in counter-clockwise order; end 0 leaves
    # from edge.u, end 1 from edge.v
    rotation: dict = field(repr=False)
    shorts: tuple[ShortTrajectoryCertificate, ...] = ()

    @property
    def vertices(self) -> tuple[str, ...]:
        return ZERO_LABELS + (INF,)

    @property
    def short_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.short]

    @property
    def tree(self) -> bool:
        return self.summit is not None

    @property
    def summit(self) -> str | None:
        sh = self.short_edges
        if len(sh) != 2:
            return None
        common = {sh[0].u, sh[0].v} & {sh[1].u, sh[1].v}
        return next(iter(common)) if len(common) == 1 else None

    def degree(self, vertex: str) -> int:
        return len(self.rotation[vertex])

    def zero_point(self, label: str) -> complex:
        return zeros_of(self.a)[ZERO_LABELS.index(label)]

    def dart_points(self, dart) -> np.ndarray:
        e, end = dart
        pts = self.edges[e].points
        return pts if end == 0 else pts[::-1]


def _dart_origin(graph: StokesGraph, dart) -> str:
    e = graph.edges[dart[0]]
    return e.u if dart[1] == 0 else e.v


def _runs_together(li: LineString, lj: LineString, at: Point,
                   arm: float = 0.5, rel: float = 1e-3) -> bool:
    # two trajectories converging into one direction at infinity may touch
    # below polyline resolution; a tracing fault crosses transversally
    s0 = li.project(at)
    sep = max(lj.distance(li.interpolate(min(max(s0 + ds, 0.0), li.length)))
              for ds in (-arm, arm))
    return sep <= rel * max(1.0, math.hypot(at.x, at.y))


def _tangent_at(line: LineString, at: Point) -> complex:
    s0 = line.project(at)
    h = min(1e-3, 0.5 * line.length)
    p0 = line.interpolate(max(s0 - h, 0.0))
    p1 = line.interpolate(min(s0 + h, line.length))
    return complex(p1.x - p0.x, p1.y - p0.y)


def _crossing_angle(li: LineString, lj: LineString, at: Point) -> float:
    # horizontal trajectories share one line field, so two traces can only
    # meet tangentially; a visible angle means a trace left its leaf
    ti, tj = _tangent_at(li, at), _tangent_at(lj, at)
    if abs(ti) == 0 or abs(tj) == 0:
        return 0.0
    ang = abs(cmath.phase(ti / tj)) % math.pi
    return min(ang, math.pi - ang)


def _check_planar(edges: Sequence[Edge], zero_pts: dict) -> None:
    lines = [LineString(np.column_stack([e.points.real, e.points.imag])) for e in edges]
    for i in range(len(edges)):
        for j in range(i + 1, len(edges)):
            if not lines[i].intersects(lines[j]):
                continue
            shared = ({edges[i].u, edges[i].v} & {edges[j].u, edges[j].v}) - {INF}
            inter = lines[i].intersection(lines[j])
            pts = [g for g in getattr(inter, "geoms", [inter])]
            for g in pts:
                if g.geom_type != "Point":
                    raise NonPlanar(f"edges {edges[i].label} and {edges[j].label} overlap")
                z = complex(g.x, g.y)
                if any(abs(z - zero_pts[s]) <= 1e-9 for s in shared):
                    continue
                if (_crossing_angle(lines[i], lines[j], g) < math.radians(SNAP_DEG)
                        or _runs_together(lines[i], lines[j], g)):
                    continue
                raise NonPlanar(
                    f"edges {edges[i].label} and {edges[j].label} cross at {z:.6g}")


def _clip_at(pts: np.ndarray, r: float) -> np.ndarray:
    """Polyline up to its first crossing of |z| = r (inclusive)."""
    rad = np.abs(pts)
    hit = np.nonzero(rad >= r)[0]
    if len(hit) == 0:
        return pts
    j = int(hit[0])
    if j == 0:
        return pts[:1]
    u = (r - rad[j - 1]) / (rad[j] - rad[j - 1])
    z = pts[j - 1] + u * (pts[j] - pts[j - 1])
    return np.concatenate([pts[:j], [z]])


_GX, _GW = np.polynomial.legendre.leggauss(64)


def _re_period_between(a, theta, z0, z1, w0) -> float:
    """Re of the integral of e^{i theta} sqrt(p_a) along [z0, z1], starting
    on the branch w0 at z0 (both ends far from the zeros)."""
    u = np.concatenate([[0.0], (_GX + 1.0) / 2.0])
    z = z0 + u * (z1 - z0)
    w = cmath.exp(1j * theta) * np.sqrt((z - a) * (z * z - 1.0))
    prev = w0
    for n in range(len(z)):
        if abs(w[n] - prev) > abs(w[n] + prev):
            w[n] = -w[n]
        prev = w[n]
    return float((np.dot(_GW / 2.0, w[1:]) * (z1 - z0)).real)


def _order_at_infinity(a, theta, edges: Sequence[Edge]) -> list[Edge]:
    """Escaping edges in counter-clockwise order around the origin.

    Rays that share a critical direction can be closer than the polyline
    chords resolve, so inside a direction the order comes from the period:
    moving counter-clockwise across rays that leave outward, Re Phi
    decreases.
    """
    groups: dict[int, list[Edge]] = {}
    for e in edges:
        if not e.short:
            groups.setdefault(e.direction, []).append(e)
    out = []
    for k in sorted(groups):
        grp = groups[k]
        if len(grp) > 1:
            ref = grp[0]
            z0 = complex(ref.points[-1])
            t = z0 - complex(ref.points[-2])
            w0 = cmath.exp(1j * theta) * cmath.sqrt((z0 - a) * (z0 * z0 - 1.0))
            if (w0 * t).imag < 0:
                w0 = -w0
            key = {e.id: (0.0 if e is ref else
                          _re_period_between(a, theta, z0, complex(e.points[-1]), w0))
                   for e in grp}
            grp = sorted(grp, key=lambda e: -key[e.id])
        out.extend(grp)
    return out


def assemble(a, theta, rays: RaySystem, check_planar: bool = True) -> StokesGraph:
    """Critical graph from a traced ray system: escaping rays are edges
    zero -> infinity, certified shorts are zero -> zero edges."""
    a = complex(a)
    edges = []
    for i, ray in enumerate(rays.rays):
        if ray.terminal.kind == "infinity":
            edges.append(Edge(i, ray.origin, INF, ray.points, ray.terminal.direction))
        else:
            edges.append(Edge(i, ray.origin, ray.terminal.target, ray.points))
    rotation: dict[str, list] = {}
    for label in ZERO_LABELS:
        slots = sorted(rays.slots[label])
        rotation[label] = [(idx, 1 if rev else 0) for _, idx, rev in slots]
        if len(rotation[label]) != 3:
            raise InconsistentArrangement(
                f"zero {label} has degree {len(rotation[label])}, expected 3")
    # counter-clockwise around infinity is decreasing arg z
    rotation[INF] = [(e.id, 1) for e in reversed(_order_at_infinity(a, theta, edges))]
    darts = sorted(d for lst in rotation.values() for d in lst)
    expected = sorted((e.id, end) for e in edges for end in (0, 1))
    if darts != expected:
        raise InconsistentArrangement("rotation system does not cover every dart once")
    zero_pts = dict(zip(ZERO_LABELS, zeros_of(a)))
    if check_planar:
        r_cut = min(abs(e.points[-1]) for e in edges if not e.short)
        clipped = [e if e.short else Edge(e.id, e.u, e.v, _clip_at(e.points, r_cut), e.direction)
                   for e in edges]
        _check_planar(clipped, zero_pts)
    return StokesGraph(a, float(theta), tuple(edges), rotation, tuple(rays.shorts))


# ---------------------------------------------------------------------------
# faces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Corner:
    """A vertex of a closed curve built from trajectory arcs.

    ``order`` is the zero order n (1 at a simple zero, 0 at a regular point)
    and ``angle`` the interior angle in radians. At the pole at infinity use
    ``order=None`` and ``k`` = number of critical-direction gaps spanned.
    """
    order: int | None
    angle: float = 0.0
    k: int = 0


@dataclass(frozen=True)
class Face:
    darts: tuple[tuple[int, int], ...]
    corners: tuple[Corner, ...]
    kind: str                                  # "half-plane" or "strip"
    directions: tuple[int, ...]                # critical directions at its ends
    zeros: tuple[str, ...]

    @property
    def edges(self) -> tuple[int, ...]:
        return tuple(sorted({d[0] for d in self.darts}))


@dataclass(frozen=True)
class StripInfo:
    face: int
    edges: tuple[str, ...]
    directions: tuple[int, int]
    zeros: tuple[str, ...]
    real_intervals: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class DomainDecomposition:
    faces: tuple[Face, ...]
    strips: tuple[StripInfo, ...]
    euler: int

    @property
    def half_planes(self) -> int:
        return sum(f.kind == "half-plane" for f in self.faces)

    @property
    def strip_count(self) -> int:
        return len(self.strips)


def _point_at_length(pts: np.ndarray, s: float) -> complex:
    seg = np.abs(np.diff(pts))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if s >= cum[-1]:
        return complex(pts[-1])
    j = int(np.searchsorted(cum, s, side="right")) - 1
    u = (s - cum[j]) / seg[j] if seg[j] > 0 else 0.0
    return complex(pts[j] + u * (pts[j + 1] - pts[j]))


def measure_length(graph: StokesGraph) -> float:
    z = zeros_of(graph.a)
    dmin = min(abs(z[i] - z[j]) for i in range(3) for j in range(i + 1, 3))
    return min(0.05, 0.1 * dmin)


def _dart_angle(graph: StokesGraph, dart, s: float) -> float:
    pts = graph.dart_points(dart)
    q = _point_at_length(pts, s)
    return math.atan2((q - pts[0]).imag, (q - pts[0]).real)


def _next_dart(graph: StokesGraph, dart):
    rev = (dart[0], 1 - dart[1])
    lst = graph.rotation[_dart_origin(graph, rev)]
    return lst[(lst.index(rev) - 1) % len(lst)], rev


def decompose(graph: StokesGraph, intervals: bool = True) -> DomainDecomposition:
    """Enumerate the faces of the embedded graph and classify each."""
    s = measure_length(graph)
    seen = set()
    faces = []
    for start in sorted(d for lst in graph.rotation.values() for d in lst):
        if start in seen:
            continue
        darts, corners, dirs, zeros = [], [], [], set()
        d = start
        while d not in seen:
            seen.add(d)
            darts.append(d)
            nxt, rev = _next_dart(graph, d)
            at = _dart_origin(graph, rev)
            if at == INF:
                i = graph.edges[rev[0]].direction
                j = graph.edges[nxt[0]].direction
                k = (j - i) % 5
                if k > 1:
                    raise FaceClassificationAmbiguous(
                        f"face spans directions D{i}..D{j} at infinity")
                corners.append(Corner(None, k=k))
                dirs.append(i if k == 0 else None)
                if k == 1:
                    dirs[-1] = (i, j)
            else:
                zeros.add(at)
                ang = (_dart_angle(graph, rev, s) - _dart_angle(graph, nxt, s)) % TWO_PI
                if nxt == rev:
                    ang = TWO_PI
                corners.append(Corner(1, ang))
            d = nxt
        if d != start:
            raise InconsistentArrangement("face walk did not close")
        runs = [c for c in corners if c.order is None]
        if len(runs) == 1 and runs[0].k == 1:
            kind = "half-plane"
            directions = dirs[0]
        elif len(runs) == 2 and all(c.k == 0 for c in runs):
            kind = "strip"
            directions = tuple(sorted(dirs))
        else:
            raise FaceClassificationAmbiguous(
                f"face with infinity visits {[c.k for c in runs]} at a={graph.a}")
        faces.append(Face(tuple(darts), tuple(corners), kind, directions,
                          tuple(sorted(zeros, key=ZERO_LABELS.index))))
    V = len(graph.vertices)
    E = len(graph.edges)
    euler = V - E + len(faces)
    if euler != 2:
        raise InconsistentArrangement(f"V - E + F = {euler} at a={graph.a}, theta={graph.theta}")
    strips = []
    for n, f in enumerate(faces):
        if f.kind != "strip":
            continue
        ivals = real_intervals(graph, f) if intervals else ()
        strips.append(StripInfo(n, tuple(sorted(graph.edges[e].label for e in f.edges)),
                                f.directions, f.zeros, ivals))
    return DomainDecomposition(tuple(faces), tuple(strips), euler)


def face_polygon(graph: StokesGraph, face: Face) -> Polygon:
    """The face clipped to the tracing disk, closed along arcs at infinity."""
    r_cut = min(abs(e.points[-1]) for e in graph.edges if not e.short)
    ring: list[complex] = []
    for d in face.darts:
        pts = graph.dart_points(d)
        if not graph.edges[d[0]].short:
            pts = _clip_at(graph.edges[d[0]].points, r_cut)
            pts = pts if d[1] == 0 else pts[::-1]
        ring.extend(pts[:-1])
        if _dart_origin(graph, (d[0], 1 - d[1])) == INF:
            nxt, _ = _next_dart(graph, d)
            z0 = pts[-1]
            z1 = _clip_at(graph.edges[nxt[0]].points, r_cut)[-1]
            b0 = math.atan2(z0.imag, z0.real)
            span = (math.atan2(z1.imag, z1.real) - b0) % TWO_PI
            if span > math.pi and graph.edges[d[0]].direction == graph.edges[nxt[0]].direction:
                span -= TWO_PI
            m = max(2, int(abs(span) / 0.01))
            u = np.linspace(0.0, 1.0, m + 1)[:-1]
            r = abs(z0) + u * (abs(z1) - abs(z0))
            ring.extend(r * np.exp(1j * (b0 + u * span)))
    arr = np.asarray(ring)
    poly = Polygon(np.column_stack([arr.real, arr.imag]))
    return poly if poly.is_valid else make_valid(poly)


def real_intervals(graph: StokesGraph, face: Face) -> tuple[tuple[float, float], ...]:
    """Sub-intervals of the real axis (within the tracing disk) inside a face."""
    poly = face_polygon(graph, face)
    minx, _, maxx, _ = poly.bounds
    inter = poly.intersection(LineString([(minx - 1.0, 0.0), (maxx + 1.0, 0.0)]))
    out = []
    for g in getattr(inter, "geoms", [inter]):
        if g.geom_type == "LineString" and g.length > 1e-9:
            xs = [c[0] for c in g.coords]
            out.append((round(min(xs), 9), round(max(xs), 9)))
    return tuple(sorted(out))


def face_of(graph: StokesGraph, decomposition: DomainDecomposition, z) -> int | None:
    z = complex(z)
    pt = Point(z.real, z.imag)
    for n, f in enumerate(decomposition.faces):
        if face_polygon(graph, f).contains(pt):
            return n
    return None


# ---------------------------------------------------------------------------
# Teichmueller identity
# ---------------------------------------------------------------------------

def corner_contribution(c: Corner) -> Fraction:
    if c.order is None:
        return Fraction(1 + c.k)
    quantum = math.pi / (c.order + 2)
    m = round(c.angle / quantum)
    if abs(c.angle - m * quantum) > math.radians(SNAP_DEG):
        raise AngleSnapFailure(
            f"angle {math.degrees(c.angle):.2f} deg is not a multiple of "
            f"{math.degrees(quantum):.1f} deg")
    # 1 - (n+2) theta / (2 pi) with theta = m pi / (n+2)
    return 1 - Fraction(m, 2)


def teichmuller_residual(item, face: Face | int | None = None,
                         interior: Sequence[int] = ()) -> Fraction:
    """Left side minus right side of the Teichmueller identity.

    ``item`` is either a sequence of Corner (with ``interior`` the orders of
    critical points strictly inside the curve) or a StokesGraph together with
    one of its faces, in which case interior zeros are counted geometrically.
    A return value of 0 means the identity holds.
    """
    if isinstance(item, StokesGraph):
        graph = item
        if isinstance(face, int):
            face = decompose(graph, intervals=False).faces[face]
        poly = face_polygon(graph, face)
        inside = []
        for lab in ZERO_LABELS:
            z = graph.zero_point(lab)
            p = Point(z.real, z.imag)
            if poly.contains(p) and poly.boundary.distance(p) > 1e-6:
                inside.append(1)
        corners, interior = face.corners, inside
    else:
        corners = item
    total = sum((corner_contribution(c) for c in corners), Fraction(0))
    return total - 2 - sum(interior)


# ---------------------------------------------------------------------------
# signatures and symmetries
# ---------------------------------------------------------------------------

def signature(graph: StokesGraph, decomposition: DomainDecomposition | None = None) -> str:
    dec = decomposition or decompose(graph, intervals=False)
    labels = sorted(e.label for e in graph.edges)
    return ",".join(labels) + f"|strips={dec.strip_count}|tree={int(graph.tree)}"


_SWAP = {"-1": "+1", "+1": "-1", "a": "a"}


def _relabel(sig: str, dmap) -> str:
    body, *rest = sig.split("|")
    out = []
    for lab in body.split(","):
        if "~" in lab:
            x, y = (_SWAP[p] for p in lab.split("~"))
            x, y = sorted((x, y), key=ZERO_LABELS.index)
            out.append(f"{x}~{y}")
        else:
            z, d = lab.split(":D")
            out.append(f"{_SWAP[z]}:D{dmap(int(d))}")
    return "|".join([",".join(sorted(out))] + rest)


def relabel_sym1(sig: str) -> str:
    """Signature of (-a, theta + pi/2) predicted from that of (a, theta):
    z -> -z swaps -1 and +1 and sends D_k to D_{k+3}."""
    return _relabel(sig, lambda k: (k + 3) % 5)


def relabel_sym2(sig: str) -> str:
    """Signature of (-conj a, pi/2 - theta) predicted from that of (a, theta):
    z -> -conj z swaps -1 and +1 and sends D_k to D_{2-k}."""
    return _relabel(sig, lambda k: (2 - k) % 5)


@dataclass(frozen=True)
class Classification:
    a: complex
    theta: float
    signature: str
    shorts: int
    tree: bool
    summit: str | None
    strips: int
    half_planes: int
    graph: StokesGraph = field(repr=False)
    decomposition: DomainDecomposition = field(repr=False)

    @property
    def short_pairs(self) -> tuple[str, ...]:
        return tuple(sorted(e.label for e in self.graph.short_edges))

    @property
    def strip_directions(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(s.directions for s in self.decomposition.strips))


def classify(a, theta, snap: float | None = None,
             settings: TraceSettings | None = None,
             intervals: bool = True) -> Classification:
    """Structure class of the critical graph at (a, theta).

    With ``snap`` set, a is first moved to the nearest point of the trimmed
    curve set within that distance (theta must lie in [0, pi/4]).
    """
    a = complex(a)
    theta = float(theta)
    if snap is not None:
        from .levelset import snap_to_xi
        b = snap_to_xi(a, theta, tol=snap)
        if b is not None:
            a = b
    rays = all_critical_rays(a, theta, settings)
    graph = assemble(a, theta, rays)
    dec = decompose(graph, intervals=intervals)
    return Classification(a, theta, signature(graph, dec), len(graph.short_edges),
                          graph.tree, graph.summit, dec.strip_count,
                          dec.half_planes, graph, dec)
