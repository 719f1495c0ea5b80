"""Critical horizontal trajectories of -e^{2i theta} p_a(z) dz^2.

A horizontal trajectory from a zero z0 is a curve along which
Phi(z) = int_{z0}^{z} e^{i theta} sqrt(p_a) stays purely imaginary. Rays are
traced in the complex plane by RK4 on the unit direction field
i * conj(w)/|w|, w = e^{i theta} sqrt(p_a), followed by a Newton corrector
that pushes Re Phi back to zero. Phi itself is accumulated with a 6-point
Gauss rule on every step, so the level error is measured, not assumed.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .complexcore import check_nondegenerate, dp
from .errors import StallDetected, StallNearZero

TWO_PI = 2.0 * math.pi
ZERO_LABELS = ("-1", "+1", "a")

_gx, _gw = np.polynomial.legendre.leggauss(6)
_GS = (_gx + 1.0) / 2.0
_GW = _gw / 2.0
_x24, _w24 = np.polynomial.legendre.leggauss(24)
_GS24 = (_x24 + 1.0) / 2.0
_GW24 = _w24 / 2.0

STATUS_INFINITY, STATUS_HIT, STATUS_STALL, STATUS_STALL_NEAR_ZERO = 0, 1, 2, 3


@dataclass(frozen=True)
class TraceSettings:
    r_inf: float = 30.0
    eps_hit: float = 1e-4
    tol_residual: float = 1e-8
    step_factor: float = 0.1
    max_step: float = 0.05
    max_steps: int = 40000

    def tightened(self) -> "TraceSettings":
        return TraceSettings(self.r_inf, self.eps_hit, self.tol_residual,
                             self.step_factor / 10.0, self.max_step / 10.0,
                             self.max_steps * 10)


@dataclass(frozen=True)
class Terminal:
    kind: str                   # "infinity" or "zero"
    direction: int | None = None
    target: str | None = None


@dataclass(frozen=True)
class CriticalRay:
    origin: str
    origin_point: complex
    launch_angle: float
    points: np.ndarray = field(repr=False)
    periods: np.ndarray = field(repr=False)
    terminal: Terminal
    residual: float = 0.0
    min_gap: float = math.inf

    @property
    def is_short(self) -> bool:
        return self.terminal.kind == "zero"

    @property
    def level_error(self) -> float:
        return float(np.max(np.abs(self.periods.real)))


@dataclass(frozen=True)
class ShortTrajectoryCertificate:
    endpoints: tuple[str, str]
    period: complex
    residual: float
    gap: float


# ---------------------------------------------------------------------------
# compiled kernel
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _track(a, eth, z, wref):
    w = eth * cmath.sqrt((z - a) * (z * z - 1.0))
    if abs(w - wref) > abs(w + wref):
        w = -w
    return w


@njit(cache=True, nogil=True)
def _seg(a, eth, za, zb, wa, gs, gw):
    d = zb - za
    acc = 0j
    w = wa
    for k in range(gs.size):
        w = _track(a, eth, za + gs[k] * d, w)
        acc += gw[k] * w
    wb = _track(a, eth, zb, w)
    return acc * d, wb


@njit(cache=True, nogil=True)
def _direction(w):
    return 1j * w.conjugate() / abs(w)


@njit(cache=True, nogil=True)
def _closing(a, eth, z, w, j, zs, gs, gw):
    """Integral of the tracked w from z to the zero zs[j].

    With z(s) = zs[j] + s^2 (z - zs[j]) the integrand is analytic in s.
    """
    zj = zs[j]
    q = 1.0 + 0j
    for m in range(3):
        if m != j:
            q = q * (z - zs[m])
    rq = cmath.sqrt(q)
    base = cmath.sqrt(z - zj) * rq * eth
    sgn = 1.0 if abs(base - w) < abs(base + w) else -1.0
    acc = 0j
    for k in range(gs.size - 1, -1, -1):
        s = gs[k]
        zz = zj + s * s * (z - zj)
        qq = 1.0 + 0j
        for m in range(3):
            if m != j:
                qq = qq * (zz - zs[m])
        r = cmath.sqrt(qq)
        if abs(r - rq) > abs(r + rq):
            r = -r
        rq = r
        acc += gw[k] * s * s * r
    return -2.0 * (z - zj) * cmath.sqrt(z - zj) * eth * sgn * acc


@njit(cache=True, nogil=True)
def _trace(a, theta, iz0, angle, r_inf, eps_hit, tol_res, step_factor,
           max_step, max_steps, gs, gw, gs24, gw24):
    zs = np.empty(3, np.complex128)
    zs[0] = -1.0
    zs[1] = 1.0
    zs[2] = a
    z0 = zs[iz0]
    eth = cmath.exp(1j * theta)
    dmin = 1e300
    for m in range(3):
        for n in range(m + 1, 3):
            dmin = min(dmin, abs(zs[m] - zs[n]))
    delta = min(1e-3, 1e-2 * dmin)
    z = z0 + delta * cmath.exp(1j * angle)
    q = 1.0 + 0j
    for m in range(3):
        if m != iz0:
            q = q * (z - zs[m])
    w = eth * cmath.sqrt(z - z0) * cmath.sqrt(q)
    phi = -_closing(a, eth, z, w, iz0, zs, gs24, gw24)
    if phi.imag < 0:
        w = -w
        phi = -phi
    # the launch point sits on the tangent line; pull it onto the level set
    for c in range(3):
        if abs(phi.real) < 1e-17:
            break
        z = z - phi.real * w.conjugate() / (abs(w) ** 2)
        w = _track(a, eth, z, w)
        phi = -_closing(a, eth, z, w, iz0, zs, gs24, gw24)
    pts = np.empty(max_steps + 3, np.complex128)
    phis = np.empty(max_steps + 3, np.complex128)
    pts[0] = z0
    phis[0] = 0j
    pts[1] = z
    phis[1] = phi
    npts = 2
    ignore = np.zeros(3, np.bool_)
    status = STATUS_STALL
    target = -1
    residual = 0.0
    min_gap = 1e300
    for it in range(max_steps):
        dnear = 1e300
        for m in range(3):
            dnear = min(dnear, abs(z - zs[m]))
        h = min(max_step * max(1.0, abs(z)), step_factor * dnear)
        if h < 1e-13:
            status = STATUS_STALL_NEAR_ZERO
            break
        k1 = _direction(w)
        z2 = z + 0.5 * h * k1
        w2 = _track(a, eth, z2, w)
        k2 = _direction(w2)
        z3 = z + 0.5 * h * k2
        w3 = _track(a, eth, z3, w2)
        k3 = _direction(w3)
        z4 = z + h * k3
        w4 = _track(a, eth, z4, w3)
        k4 = _direction(w4)
        zn = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        dphi, wn = _seg(a, eth, z, zn, w, gs, gw)
        phin = phi + dphi
        for c in range(4):
            r = phin.real
            if abs(r) < 1e-15 * (1.0 + abs(phin)):
                break
            dz = -r * wn.conjugate() / (abs(wn) ** 2)
            if abs(dz) > 0.25 * h:
                break
            dphi, wn2 = _seg(a, eth, zn, zn + dz, wn, gs, gw)
            phin += dphi
            zn += dz
            wn = wn2
        z = zn
        w = wn
        phi = phin
        pts[npts] = z
        phis[npts] = phi
        npts += 1
        if abs(z) >= r_inf:
            status = STATUS_INFINITY
            break
        hit = False
        for m in range(3):
            if m == iz0:
                continue
            d = abs(z - zs[m])
            if d < min_gap:
                min_gap = d
            if ignore[m]:
                if d > 4.0 * eps_hit:
                    ignore[m] = False
                continue
            if d < eps_hit:
                cl = _closing(a, eth, z, w, m, zs, gs24, gw24)
                res = abs((phi + cl).real)
                if res <= tol_res:
                    status = STATUS_HIT
                    target = m
                    residual = res
                    pts[npts] = zs[m]
                    phis[npts] = phi + cl
                    npts += 1
                    hit = True
                    break
                ignore[m] = True
        if hit:
            break
    return pts[:npts].copy(), phis[:npts].copy(), status, target, residual, min_gap


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def zeros_of(a) -> tuple[complex, complex, complex]:
    return (-1.0 + 0j, 1.0 + 0j, complex(a))


def zero_index(z0) -> int:
    if isinstance(z0, str):
        return ZERO_LABELS.index(z0)
    return int(z0)


def zero_launch_angles(a, theta, z0) -> list[float]:
    """Three directions, in [0, 2 pi) and ascending, along which horizontal
    trajectories leave the simple zero z0 (label "-1", "+1", "a" or index).

    They solve e^{i(2 theta + arg c + 3 phi)} = -1 with c = p_a'(z0).
    """
    a = check_nondegenerate(a)
    j = zero_index(z0)
    zc = zeros_of(a)[j]
    c = dp(a, zc)
    base = (math.pi - 2.0 * theta - cmath.phase(c)) / 3.0
    return sorted((base + 2.0 * m * math.pi / 3.0) % TWO_PI for m in range(3))


def direction_index(z, theta) -> int:
    """Index k of the critical direction arg z = (-2 theta + (2k+1) pi)/5
    nearest to arg z."""
    k = round((5.0 * cmath.phase(z) + 2.0 * theta - math.pi) / TWO_PI)
    return int(k) % 5


def critical_direction(theta, k) -> float:
    return (-2.0 * theta + (2 * k + 1) * math.pi) / 5.0


def effective_r_inf(a, settings: TraceSettings) -> float:
    # direction classification needs the zeros to be small against R_inf
    return max(settings.r_inf, 4.0 * abs(complex(a)) + 4.0)


def trace_ray(a, theta, z0, angle, settings: TraceSettings | None = None) -> CriticalRay:
    """Trace the horizontal trajectory leaving zero ``z0`` at ``angle``."""
    settings = settings or TraceSettings()
    a = check_nondegenerate(a)
    j = zero_index(z0)
    r_inf = effective_r_inf(a, settings)
    pts, phis, status, target, residual, min_gap = _trace(
        a, float(theta), j, float(angle), r_inf, settings.eps_hit,
        settings.tol_residual, settings.step_factor, settings.max_step,
        settings.max_steps, _GS, _GW, _GS24, _GW24)
    if status == STATUS_INFINITY:
        term = Terminal("infinity", direction=direction_index(pts[-1], theta))
    elif status == STATUS_HIT:
        term = Terminal("zero", target=ZERO_LABELS[target])
    elif status == STATUS_STALL_NEAR_ZERO:
        raise StallNearZero(
            f"step collapsed near a zero tracing from {ZERO_LABELS[j]} "
            f"at a={a}, theta={theta}")
    else:
        raise StallDetected(
            f"ray from {ZERO_LABELS[j]} exhausted {settings.max_steps} steps "
            f"at a={a}, theta={theta}")
    return CriticalRay(ZERO_LABELS[j], zeros_of(a)[j], float(angle), pts, phis,
                       term, float(residual), float(min_gap))


def arrival_angle(ray: CriticalRay) -> float:
    """Direction, seen from the target zero, along which a short ray arrives."""
    end = ray.points[-1]
    prev = ray.points[-2]
    return cmath.phase(prev - end) % TWO_PI


def _angle_gap(x, y) -> float:
    d = (x - y) % TWO_PI
    return min(d, TWO_PI - d)


def certify_short(a, theta, ray: CriticalRay,
                  settings: TraceSettings | None = None
                  ) -> ShortTrajectoryCertificate | None:
    """Certificate for a ray that ended on another zero, or None.

    The period is the integral of e^{i theta} sqrt(p_a) along the ray's
    polyline (accumulated during tracing, closed by a w^2-substituted
    integral onto the target). The ray qualifies iff |Re period| is below
    the residual tolerance and its last free vertex is within eps_hit of
    the target.
    """
    settings = settings or TraceSettings()
    if ray.terminal.kind != "zero":
        return None
    period = complex(ray.periods[-1])
    gap = abs(ray.points[-2] - ray.points[-1])
    residual = abs(period.real)
    if residual > settings.tol_residual or gap > settings.eps_hit:
        return None
    return ShortTrajectoryCertificate((ray.origin, ray.terminal.target),
                                      period, residual, gap)


@dataclass(frozen=True)
class RaySystem:
    a: complex
    theta: float
    rays: tuple[CriticalRay, ...]                 # every traced ray
    shorts: tuple[ShortTrajectoryCertificate, ...]
    # for each zero label, its three (launch angle, ray index, reversed) slots
    slots: dict = field(repr=False, default_factory=dict)

    @property
    def infinite_rays(self) -> list[CriticalRay]:
        return [r for r in self.rays if r.terminal.kind == "infinity"]

    @property
    def short_rays(self) -> list[CriticalRay]:
        return [r for r in self.rays if r.terminal.kind == "zero"]


def _trace_checked(a, theta, label, angle, settings):
    ray = trace_ray(a, theta, label, angle, settings)
    if ray.terminal.kind == "infinity" and ray.min_gap < 10.0 * settings.eps_hit:
        # near miss: re-trace with finer steps before trusting it
        ray = trace_ray(a, theta, label, angle, settings.tightened())
    return ray


def all_critical_rays(a, theta, settings: TraceSettings | None = None) -> RaySystem:
    """Trace the 3 x 3 critical rays and merge coincident pairs into shorts.

    Rays are processed by origin (-1, +1, a) then ascending launch angle. A
    ray whose launch direction coincides with the arrival direction of an
    already certified short is that same short traversed backwards and is not
    traced again.
    """
    settings = settings or TraceSettings()
    a = check_nondegenerate(a)
    theta = float(theta)
    rays: list[CriticalRay] = []
    shorts: list[ShortTrajectoryCertificate] = []
    slots: dict[str, list] = {lab: [] for lab in ZERO_LABELS}
    arrivals: dict[str, list] = {lab: [] for lab in ZERO_LABELS}
    for label in ZERO_LABELS:
        for angle in zero_launch_angles(a, theta, label):
            matched = None
            for idx, arr in arrivals[label]:
                if _angle_gap(arr, angle) < math.radians(20.0):
                    matched = idx
                    break
            if matched is not None:
                slots[label].append((angle, matched, True))
                continue
            ray = _trace_checked(a, theta, label, angle, settings)
            cert = certify_short(a, theta, ray, settings) if ray.is_short else None
            if ray.is_short and cert is None:
                ray = trace_ray(a, theta, label, angle, settings.tightened())
                cert = certify_short(a, theta, ray, settings) if ray.is_short else None
            if ray.is_short:
                target = ray.terminal.target
                if ZERO_LABELS.index(target) < ZERO_LABELS.index(label):
                    # the reverse ray was traced earlier and escaped: trust the
                    # certified hit and retire that earlier ray
                    arr = arrival_angle(ray)
                    for n, (ang, idx, rev) in enumerate(slots[target]):
                        if not rev and _angle_gap(ang, arr) < math.radians(20.0):
                            rays[idx] = ray
                            slots[target][n] = (ang, idx, True)
                            slots[label].append((angle, idx, False))
                            shorts.append(cert)
                            break
                    else:
                        raise StallDetected("short trajectory without a matching slot")
                    continue
                arrivals[target].append((len(rays), arrival_angle(ray)))
                shorts.append(cert)
            slots[label].append((angle, len(rays), False))
            rays.append(ray)
    # drop rays retired above (they were replaced in place, so nothing to do)
    if len(shorts) > 2:
        raise StallDetected(f"{len(shorts)} short trajectories found; at most 2 exist")
    return RaySystem(a, theta, tuple(rays), tuple(shorts), slots)
