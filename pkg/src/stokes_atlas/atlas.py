"""Command line front end: special-point tables, point classification, grid
atlases, the pi/8 phase scan, the very-flat search and SVG rendering.

Records are JSON lines. Complex values are written as [re, im] rounded to
12 significant digits, so a record parses back and re-serializes to the
same bytes.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import InputError, NotFound, SolverError, StokesAtlasError
from .levelset import (ARCTAN_HALF_HALF, build_region_map, find_e, find_t,
                       locate, reduce_theta, sigma_curves, snap_to_xi,
                       special_points)
from .stokesgraph import classify
from .trajectory import TraceSettings, critical_direction

SIG_DIGITS = 12
DEFAULT_THETAS = (0.0, ARCTAN_HALF_HALF, math.pi / 8, math.pi / 4)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _default_palette():
    return {"sigma+1": "#1f3fbf", "sigma-1": "#d62728", "sigma_theta": "#2ca02c",
            "graph": "#111111", "short": "#ff7f0e", "directions": "#9a9a9a",
            "special": "#000000"}


@dataclass(frozen=True)
class Config:
    r_world: float = 50.0
    curve_step: float = 0.05
    r_inf: float = 30.0
    eps_hit: float = 1e-4
    tol_residual: float = 1e-8
    step_factor: float = 0.1
    max_step: float = 0.05
    max_steps: int = 40000
    locate_tol: float = 1e-6
    on_curve_gate: float = 0.05
    snap_tol: float = 1e-2
    puncture: float = 1e-3
    flat_sweep: int = 24
    search_radius: float = 1e4
    grid: str = "50x50"
    window: str = "-3,3,-3,3"
    palette: dict = field(default_factory=_default_palette)

    @property
    def trace(self) -> TraceSettings:
        return TraceSettings(self.r_inf, self.eps_hit, self.tol_residual,
                             self.step_factor, self.max_step, self.max_steps)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | None) -> "Config":
        if not path:
            return cls()
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        if "palette" in data:
            data["palette"] = {**_default_palette(), **data["palette"]}
        return cls(**data)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def _r(x: float) -> float:
    return float(f"{float(x):.{SIG_DIGITS}g}")


def _c(z) -> list[float]:
    z = complex(z)
    return [_r(z.real), _r(z.imag)]


@dataclass(frozen=True)
class ScanRecord:
    theta: float
    a: complex
    signature: str
    shorts: int
    strips: int
    tree: bool
    verdict: str
    reduction: str = ""
    error: str = ""

    def to_json(self) -> str:
        d = {"theta": _r(self.theta), "a": _c(self.a), "signature": self.signature,
             "shorts": self.shorts, "strips": self.strips, "tree": self.tree,
             "verdict": self.verdict, "reduction": self.reduction,
             "error": self.error}
        return json.dumps(d, separators=(", ", ": "))

    @classmethod
    def from_json(cls, line: str) -> "ScanRecord":
        d = json.loads(line)
        d["a"] = complex(*d["a"])
        return cls(**d)


def _unreduce(b: complex, ops) -> complex:
    # both symmetries are involutions on a; undo them in reverse order
    for op in reversed(ops):
        b = -b if op == "rot" else -b.conjugate()
    return b


def scan_point(a, theta, cfg: Config) -> ScanRecord:
    """Classify one parameter and attach its locate verdict.

    When locate puts a on a curve (within ``locate_tol``) the point is first
    snapped onto it, so the short trajectory the verdict promises is traced.
    """
    a = complex(a)
    theta = float(theta)
    red = reduce_theta(a, theta)
    rm = build_region_map(red.theta, step=cfg.curve_step, R_world=cfg.r_world)
    verdict = "out-of-world"
    b = a
    if abs(red.a) <= cfg.r_world:
        loc = locate(a, theta, tol=cfg.locate_tol, region_map=rm)
        verdict = str(loc)
        if loc.on_curve:
            snapped = snap_to_xi(red.a, red.theta, tol=max(cfg.locate_tol, 1e-9),
                                 region_map=rm)
            if snapped is not None:
                b = _unreduce(snapped, red.ops)
    c = classify(b, theta, settings=cfg.trace, intervals=False)
    return ScanRecord(theta, a, c.signature, c.shorts, c.strips, c.tree, verdict,
                      ",".join(red.ops))


def _safe_scan(args):
    a, theta, cfg = args
    try:
        return scan_point(a, theta, cfg)
    except StokesAtlasError as exc:
        return ScanRecord(theta, a, "", -1, -1, False, "", "",
                          f"{type(exc).__name__}: {exc}")


def threads() -> int:
    env = os.environ.get("ATLAS_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, int(env))
        except ValueError:
            raise InputError(f"ATLAS_THREADS must be an integer, got {env!r}")
    return n


def grid_points(grid: str, window: str, puncture: float) -> list[complex]:
    n, m = parse_grid(grid)
    x0, x1, y0, y1 = parse_floats(window, 4, "window")
    pts = []
    for y in np.linspace(y0, y1, m):
        for x in np.linspace(x0, x1, n):
            z = complex(x, y)
            if min(abs(z - 1.0), abs(z + 1.0)) >= puncture:
                pts.append(z)
    return pts


def cmd_atlas(theta, grid, window, cfg: Config):
    """ScanRecords for a grid, in grid order whatever the completion order."""
    theta = float(theta)
    red = reduce_theta(0j, theta)
    build_region_map(red.theta, step=cfg.curve_step, R_world=cfg.r_world)
    pts = grid_points(grid, window, cfg.puncture)
    jobs = [(z, theta, cfg) for z in pts]
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        yield from pool.map(_safe_scan, jobs)


# ---------------------------------------------------------------------------
# table, phase scan, very flat
# ---------------------------------------------------------------------------

def cmd_table(thetas):
    rows = []
    for th in thetas:
        if not -1e-15 <= th <= math.pi / 4 + 1e-12:
            raise InputError(f"theta {th} outside [0, pi/4]")
        th = min(max(th, 0.0), math.pi / 4)
        row = {"theta": _r(th)}
        for name in ("t", "s", "e"):
            try:
                sp = special_points(th)
                v = getattr(sp, name)
                row[name] = None if v is None else _c(v)
            except SolverError as exc:
                row[name] = f"error: {type(exc).__name__}"
        rows.append(row)
    return rows


def cmd_phase_scan(lo, hi, step, cfg: Config):
    """Existence and size of e_theta over a theta range, with the bracket of
    the first theta where it stops existing."""
    if step <= 0 or lo > hi:
        raise InputError("need from <= to and step > 0")
    if lo < 0.0 or hi > math.pi / 4 + 1e-12:
        raise InputError("scan range must lie in [0, pi/4]")
    n = int(math.floor((hi - lo) / step + 1e-9))
    rows = []
    for j in range(n + 1):
        th = lo + j * step
        t = find_t(th)
        e = find_e(th, search_radius=cfg.search_radius)
        rows.append({"theta": _r(th), "t": _c(t),
                     "e": None if e is None else _c(e),
                     "abs_e": None if e is None else _r(abs(e)),
                     "trees": 1 if e is None else 2})
    bracket = None
    for r0, r1 in zip(rows, rows[1:]):
        if r0["e"] is not None and r1["e"] is None:
            bracket = [r0["theta"], r1["theta"]]
            break
    return rows, bracket


def cmd_find_flat(a, cfg: Config):
    """First theta = j pi / N (j = 0..N-1) at which a has two strip domains."""
    a = complex(a)
    if a in (1.0, -1.0):
        raise InputError("a must differ from -1 and +1")
    tried = []
    for j in range(cfg.flat_sweep):
        th = j * math.pi / cfg.flat_sweep
        try:
            c = classify(a, th, settings=cfg.trace, intervals=False)
        except SolverError as exc:
            tried.append((th, type(exc).__name__))
            continue
        if c.strips == 2:
            # confirm with finer tracing before reporting
            c2 = classify(a, th, settings=cfg.trace.tightened(), intervals=False)
            if c2.strips == 2:
                return th, c2
        tried.append((th, c.strips))
    raise NotFound(f"no sampled theta gives two strips for a={a}: {tried}")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RenderSpec:
    window: tuple[float, float, float, float] = (-3.0, 3.0, -3.0, 3.0)
    size: tuple[float, float] = (6.0, 6.0)
    layers: tuple[str, ...] = ("sigma",)
    palette: dict = field(default_factory=_default_palette)
    linewidth: float = 1.2


_FAMILY_COLOR = {1: "sigma+1", -1: "sigma-1", "theta": "sigma_theta"}


def _figure(spec: RenderSpec):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "stokes-atlas"
    matplotlib.rcParams["path.simplify"] = False
    fig, ax = plt.subplots(figsize=spec.size)
    x0, x1, y0, y1 = spec.window
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    ax.axhline(0.0, color="#dddddd", lw=0.5, zorder=0)
    ax.axvline(0.0, color="#dddddd", lw=0.5, zorder=0)
    return fig, ax, plt


def _save(fig, plt, out):
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)


def render(what, out, spec: RenderSpec, theta=0.0, a=None, cfg: Config | None = None):
    cfg = cfg or Config()
    fig, ax, plt = _figure(spec)
    pal = spec.palette
    if what in ("sigma", "xi"):
        if not 0.0 <= theta <= math.pi / 4 + 1e-12:
            raise InputError("sigma and xi plots need theta in [0, pi/4]")
        theta = min(theta, math.pi / 4)
        if what == "sigma":
            curves = sigma_curves(theta, step=cfg.curve_step, R_world=cfg.r_world)
        else:
            curves = build_region_map(theta, step=cfg.curve_step,
                                      R_world=cfg.r_world).curves
        for cv in curves:
            ax.plot(cv.points.real, cv.points.imag, color=pal[_FAMILY_COLOR[cv.family]],
                    lw=spec.linewidth)
        sp = special_points(theta)
        marks = [("t", sp.t), ("s", complex(sp.s))] + ([("e", sp.e)] if sp.e is not None else [])
        for name, q in marks:
            ax.plot([q.real], [q.imag], "o", ms=3, color=pal["special"])
            ax.annotate(name, (q.real, q.imag), textcoords="offset points",
                        xytext=(4, 4), fontsize=8)
        ax.plot([-1.0, 1.0], [0.0, 0.0], "o", ms=3, color=pal["special"])
        ax.set_title(f"{'sigma' if what == 'sigma' else 'xi'} sets, theta = {theta:.6g}")
    elif what == "graph":
        if a is None:
            raise InputError("graph plots need --a")
        c = classify(a, theta, settings=cfg.trace, intervals=False)
        if "directions" in spec.layers:
            R = 2.0 * max(abs(v) for v in spec.window)
            for k in range(5):
                phi = critical_direction(theta, k)
                ax.plot([0.0, R * math.cos(phi)], [0.0, R * math.sin(phi)], "--",
                        color=pal["directions"], lw=0.6)
                ax.annotate(f"D{k}", (0.9 * R / 2 * math.cos(phi), 0.9 * R / 2 * math.sin(phi)),
                            fontsize=8, color=pal["directions"])
        for e in c.graph.edges:
            ax.plot(e.points.real, e.points.imag,
                    color=pal["short"] if e.short else pal["graph"], lw=spec.linewidth)
        for z in (-1.0, 1.0, c.a):
            ax.plot([z.real if isinstance(z, complex) else z],
                    [z.imag if isinstance(z, complex) else 0.0], "o", ms=4,
                    color=pal["special"])
        ax.set_title(f"critical graph, a = {complex(a):.4g}, theta = {theta:.4g}")
    else:
        raise InputError(f"unknown render target {what!r}")
    _save(fig, plt, out)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_floats(text: str, n: int | None, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{what}: expected comma separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise InputError(f"{what}: expected {n} values, got {len(vals)}")
    return vals


def parse_complex(text: str) -> complex:
    re, im = parse_floats(text, 2, "a")
    return complex(re, im)


def parse_grid(text: str) -> tuple[int, int]:
    try:
        n, m = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise InputError(f"grid: expected NxM, got {text!r}")
    if n < 1 or m < 1:
        raise InputError("grid sizes must be positive")
    return n, m


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stokes-atlas",
                description="Critical graphs of -e^{2i theta}(z-a)(z^2-1)dz^2.")
    p.add_argument("--config", help="JSON file overriding the built-in defaults")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("table", help="special points t, s, e per theta")
    s.add_argument("--theta", help="comma separated thetas in [0, pi/4]")

    s = sub.add_parser("classify", help="structure of one critical graph")
    s.add_argument("--a", required=True, type=str, help="RE,IM")
    s.add_argument("--theta", required=True, type=float)
    s.add_argument("--snap", type=float, default=None,
                   help="first move a onto the nearest curve within this distance")

    s = sub.add_parser("atlas", help="classify a grid of parameters")
    s.add_argument("--theta", required=True, type=float)
    s.add_argument("--grid", default=None, help="NxM")
    s.add_argument("--window", default=None, help="X0,X1,Y0,Y1")
    s.add_argument("--out", default=None)

    s = sub.add_parser("phase-scan", help="existence of e_theta across a range")
    s.add_argument("--from", dest="lo", required=True, type=float)
    s.add_argument("--to", dest="hi", required=True, type=float)
    s.add_argument("--step", required=True, type=float)

    s = sub.add_parser("find-flat", help="a rotation with two strip domains")
    s.add_argument("--a", required=True, type=str, help="RE,IM")

    s = sub.add_parser("render", help="SVG plots")
    s.add_argument("what", choices=["sigma", "xi", "graph"])
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--a", type=str, default=None, help="RE,IM (graph only)")
    s.add_argument("--window", default=None, help="X0,X1,Y0,Y1")
    s.add_argument("--size", default="6,6", help="W,H in inches")
    s.add_argument("--no-directions", action="store_true")
    s.add_argument("--out", required=True)

    s = sub.add_parser("config", help="configuration")
    s.add_argument("action", choices=["show"])
    return p


def _emit(lines, out=None):
    if out:
        with open(out, "w") as fh:
            for ln in lines:
                fh.write(ln + "\n")
    else:
        for ln in lines:
            print(ln)


def run(args, cfg: Config) -> int:
    if args.cmd == "config":
        print(cfg.to_json())
    elif args.cmd == "table":
        thetas = parse_floats(args.theta, None, "theta") if args.theta else DEFAULT_THETAS
        rows = cmd_table(thetas)

        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, str):
                return v
            return f"{v[0]:+.6f}{v[1]:+.6f}i"
        print(f"{'theta':>12}  {'t':>22}  {'s':>22}  {'e':>22}")
        for r in rows:
            print(f"{r['theta']:>12.6f}  {fmt(r['t']):>22}  {fmt(r['s']):>22}  {fmt(r['e']):>22}")
    elif args.cmd == "classify":
        a = parse_complex(args.a)
        if args.snap is not None:
            red = reduce_theta(a, args.theta)
            b = snap_to_xi(red.a, red.theta, tol=args.snap,
                           region_map=build_region_map(red.theta, step=cfg.curve_step,
                                                       R_world=cfg.r_world))
            if b is not None:
                a = _unreduce(b, red.ops)
        rec = scan_point(a, args.theta, cfg)
        print(rec.to_json())
    elif args.cmd == "atlas":
        recs = list(cmd_atlas(args.theta, args.grid or cfg.grid,
                              args.window or cfg.window, cfg))
        _emit((r.to_json() for r in recs), args.out)
        counts = Counter(r.signature for r in recs if not r.error)
        failed = sum(1 for r in recs if r.error)
        print(f"{len(recs)} points, {len(counts)} signatures, {failed} failures",
              file=sys.stderr)
        for sig, n in sorted(counts.items()):
            print(f"{n:6d}  {sig}", file=sys.stderr)
    elif args.cmd == "phase-scan":
        rows, bracket = cmd_phase_scan(args.lo, args.hi, args.step, cfg)
        for r in rows:
            print(json.dumps(r))
        print(json.dumps({"transition": bracket,
                          "pi_over_8": _r(math.pi / 8)}))
    elif args.cmd == "find-flat":
        th, c = cmd_find_flat(parse_complex(args.a), cfg)
        print(json.dumps({"a": _c(c.a), "theta": _r(th), "signature": c.signature,
                          "strips": c.strips}))
    elif args.cmd == "render":
        window = tuple(parse_floats(args.window, 4, "window")) if args.window else (
            (-4.0, 4.0, -4.0, 4.0) if args.what == "graph" else (-3.0, 3.0, -3.0, 3.0))
        layers = () if args.no_directions else ("directions",)
        spec = RenderSpec(window=window, size=tuple(parse_floats(args.size, 2, "size")),
                          layers=(args.what,) + layers, palette=cfg.palette)
        a = parse_complex(args.a) if args.a else None
        render(args.what, args.out, spec, theta=args.theta, a=a, cfg=cfg)
    return 0


_VALUE_OPTS = ("--a", "--window", "--theta", "--from", "--to")


def _join_negative_values(argv):
    # "--a -0.8,2" would be read as an unknown option; glue such values on
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_OPTS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif nxt.startswith("-") and nxt[1:2].isdigit() or nxt.startswith("-."):
                out.append(f"{tok}={nxt}")
            else:
                out.extend([tok, nxt])
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    try:
        cfg = Config.load(args.config)
        return run(args, cfg)
    except (InputError, ValueError) as exc:
        print(f"stokes-atlas: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"stokes-atlas: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"stokes-atlas: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
