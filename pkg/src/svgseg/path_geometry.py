"""Numeric geometry over normalized paths.

Arc-length sampling, length and area, finite-difference curvature, median
points, pairwise minimum distance, crossing counts, contiguity and
containment tests. Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .svg_ingest import NormalizedPath, arc_center_parameters

# Default sampling resolutions. The polyline/chord counts trade accuracy
# against the cost of the pairwise edge computations.
NODE_SAMPLES = 64          # points per path for distance/crossing work
CURVATURE_INTERVALS = 16   # finite-difference curvature intervals
AREA_SAMPLES = 512         # boundary samples per subpath for the shoelace area
_CURVE_TABLE = 64          # arc-length table resolution per curved segment

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class SampledPolyline:
    """Equal arc-length samples of a path.

    `breaks` marks indices i where the chord (i, i+1) jumps between
    subpaths and must not be treated as drawn geometry.
    """

    points: np.ndarray           # (n, 2)
    spacing: float
    closed: bool
    breaks: tuple[int, ...] = ()

    def chords(self) -> tuple[np.ndarray, np.ndarray]:
        """Chord start/end arrays, excluding subpath-bridging chords."""
        p, q = self.points[:-1], self.points[1:]
        if self.breaks:
            keep = np.ones(len(p), dtype=bool)
            keep[list(self.breaks)] = False
            p, q = p[keep], q[keep]
        return p, q


@dataclass(frozen=True)
class CurvatureProfile:
    samples: np.ndarray          # (n_intervals,)
    t_values: np.ndarray         # matching parameter values in [0, 1]
    n_intervals: int
    dt: float


# --- path compilation -------------------------------------------------------
#
# A path is compiled into subpaths of primitive segments, each with an
# arc-length lookup table so the whole path can be evaluated at arbitrary
# arc-length fractions.

class _Segment:
    __slots__ = ("kind", "data", "length", "u_table", "s_table")

    def __init__(self, kind: str, data):
        self.kind = kind
        self.data = data
        n = 1 if kind == "line" else _CURVE_TABLE
        u = np.linspace(0.0, 1.0, n + 1)
        pts = self.eval(u)
        gaps = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        self.u_table = u
        self.s_table = np.concatenate([[0.0], np.cumsum(gaps)])
        self.length = self._quadrature_length() if kind != "line" else float(self.s_table[-1])
        if self.length > 0:
            # Rescale the chord table so its endpoint matches the quadrature
            # length; interior interpolation error is O(table step**2).
            self.s_table *= self.length / max(self.s_table[-1], 1e-300)

    def eval(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "line":
            p0, p1 = self.data
            return p0 + u[:, None] * (p1 - p0)
        if self.kind == "cubic":
            p0, c1, c2, p1 = self.data
            v = 1 - u
            return ((v ** 3)[:, None] * p0 + (3 * v * v * u)[:, None] * c1
                    + (3 * v * u * u)[:, None] * c2 + (u ** 3)[:, None] * p1)
        if self.kind == "quad":
            p0, c1, p1 = self.data
            v = 1 - u
            return ((v * v)[:, None] * p0 + (2 * v * u)[:, None] * c1
                    + (u * u)[:, None] * p1)
        # arc
        cx, cy, rx, ry, phi, th1, dth = self.data
        theta = th1 + u * dth
        x = rx * np.cos(theta)
        y = ry * np.sin(theta)
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        return np.stack([cx + cos_p * x - sin_p * y, cy + sin_p * x + cos_p * y], axis=1)

    def _deriv_norm(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "cubic":
            p0, c1, c2, p1 = self.data
            v = 1 - u
            d = (3 * (v * v)[:, None] * (c1 - p0) + 6 * (v * u)[:, None] * (c2 - c1)
                 + 3 * (u * u)[:, None] * (p1 - c2))
        elif self.kind == "quad":
            p0, c1, p1 = self.data
            d = 2 * (1 - u)[:, None] * (c1 - p0) + 2 * u[:, None] * (p1 - c1)
        else:  # arc
            cx, cy, rx, ry, phi, th1, dth = self.data
            theta = th1 + u * dth
            dx = -rx * np.sin(theta) * dth
            dy = ry * np.cos(theta) * dth
            cos_p, sin_p = math.cos(phi), math.sin(phi)
            d = np.stack([cos_p * dx - sin_p * dy, sin_p * dx + cos_p * dy], axis=1)
        return np.hypot(d[:, 0], d[:, 1])

    def _quadrature_length(self, a: float = 0.0, b: float = 1.0, depth: int = 0) -> float:
        """Adaptive Gauss-Legendre arc length, relative tolerance 1e-6."""
        def gl(lo, hi):
            u = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
            return 0.5 * (hi - lo) * float(np.dot(_GL_WEIGHTS, self._deriv_norm(u)))

        whole = gl(a, b)
        mid = 0.5 * (a + b)
        split = gl(a, mid) + gl(mid, b)
        if depth >= 12 or abs(split - whole) <= 1e-6 * abs(split) + 1e-15:
            return split
        return (self._quadrature_length(a, mid, depth + 1)
                + self._quadrature_length(mid, b, depth + 1))

    def u_at_arclength(self, s: np.ndarray) -> np.ndarray:
        if self.length <= 0:
            return np.zeros_like(s)
        return np.interp(np.clip(s, 0.0, self.length), self.s_table, self.u_table)


class _Subpath:
    __slots__ = ("segments", "start", "end", "closed", "length", "cum")

    def __init__(self, start, segments, closed_explicit):
        self.segments = segments
        self.start = np.asarray(start, dtype=float)
        self.end = segments[-1].eval(np.array([1.0]))[0] if segments else self.start
        gap = float(np.hypot(*(self.end - self.start)))
        self.closed = bool(closed_explicit or (segments and gap <= 1e-9))
        self.length = float(sum(s.length for s in segments))
        self.cum = np.concatenate([[0.0], np.cumsum([s.length for s in segments])]) \
            if segments else np.array([0.0])

    def point_at(self, s: np.ndarray) -> np.ndarray:
        """Evaluate at arc lengths s (clipped to [0, length])."""
        if not self.segments:
            return np.broadcast_to(self.start, (len(s), 2)).copy()
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        idx = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0,
                      len(self.segments) - 1)
        out = np.empty((len(s), 2))
        for k in np.unique(idx):
            mask = idx == k
            seg = self.segments[k]
            u = seg.u_at_arclength(s[mask] - self.cum[k])
            out[mask] = seg.eval(u)
        return out


class CompiledPath:
    """Analytic form of a NormalizedPath, ready for numeric evaluation."""

    def __init__(self, path: NormalizedPath):
        self.subpaths: list[_Subpath] = []
        current: list[_Segment] = []
        start = np.zeros(2)
        cur = np.zeros(2)
        has_open = False

        def flush(closed):
            nonlocal current
            if has_open:
                self.subpaths.append(_Subpath(start, current, closed))
            current = []

        for cmd in path.commands:
            if cmd.kind == "M":
                flush(False)
                start = np.array(cmd.params, dtype=float)
                cur = start.copy()
                has_open = True
            elif cmd.kind == "Z":
                if has_open and float(np.hypot(*(cur - start))) > 1e-12:
                    current.append(_Segment("line", (cur.copy(), start.copy())))
                flush(True)
                cur = start.copy()
                has_open = False
            elif cmd.kind == "L":
                has_open = True  # drawing after Z restarts at the subpath start
                p1 = np.array(cmd.params, dtype=float)
                if float(np.hypot(*(p1 - cur))) > 0:
                    current.append(_Segment("line", (cur.copy(), p1)))
                cur = p1
            elif cmd.kind == "C":
                has_open = True
                pts = np.array(cmd.params, dtype=float).reshape(3, 2)
                current.append(_Segment("cubic", (cur.copy(), pts[0], pts[1], pts[2])))
                cur = pts[2]
            elif cmd.kind == "Q":
                has_open = True
                pts = np.array(cmd.params, dtype=float).reshape(2, 2)
                current.append(_Segment("quad", (cur.copy(), pts[0], pts[1])))
                cur = pts[1]
            elif cmd.kind == "A":
                has_open = True
                rx, ry, rot, laf, swf, x2, y2 = cmd.params
                centred = arc_center_parameters(cur[0], cur[1], rx, ry, rot, laf, swf,
                                                x2, y2)
                p1 = np.array([x2, y2])
                if centred is None:
                    if float(np.hypot(*(p1 - cur))) > 0:
                        current.append(_Segment("line", (cur.copy(), p1)))
                else:
                    current.append(_Segment("arc", centred))
                cur = p1
            else:  # H/V/S/T never survive canonicalization
                raise ValueError(f"non-canonical command {cmd.kind} in path")
        flush(False)
        if not self.subpaths:
            self.subpaths.append(_Subpath(start, [], False))

        self.length = float(sum(sp.length for sp in self.subpaths))
        self.closed = bool(self.subpaths) and all(sp.closed for sp in self.subpaths)
        self.cum = np.concatenate([[0.0], np.cumsum([sp.length for sp in self.subpaths])])

    def point_at_fraction(self, t: np.ndarray) -> np.ndarray:
        """Point at arc-length fraction t in [0, 1] of the total length
        (subpaths concatenated)."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        if self.length <= 0:
            return np.broadcast_to(self.subpaths[0].start, (len(t), 2)).copy()
        s = t * self.length
        idx = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0,
                      len(self.subpaths) - 1)
        out = np.empty((len(t), 2))
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = self.subpaths[k].point_at(s[mask] - self.cum[k])
        return out

    def endpoints(self) -> np.ndarray:
        """First and last analytic point of every subpath, stacked (m, 2)."""
        pts = []
        for sp in self.subpaths:
            pts.append(sp.start)
            pts.append(sp.start if sp.closed else sp.end)
        return np.array(pts)


def compile_path(path: NormalizedPath) -> CompiledPath:
    return CompiledPath(path)


def _as_compiled(path) -> CompiledPath:
    return path if isinstance(path, CompiledPath) else CompiledPath(path)


# --- operations --------------------------------------------------------------

def sample_equal_arclength(path, n: int) -> SampledPolyline:
    """Sample n points spaced evenly along the path's total arc length.

    A zero-length path yields its single point repeated with spacing 0.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    cp = _as_compiled(path)
    if cp.length <= 0:
        pt = cp.subpaths[0].start
        return SampledPolyline(np.tile(pt, (n, 1)), 0.0, cp.closed)
    fractions = np.arange(n) / (n - 1)
    pts = cp.point_at_fraction(fractions)
    breaks = []
    if len(cp.subpaths) > 1:
        s = fractions * cp.length
        sub_idx = np.clip(np.searchsorted(cp.cum, s, side="right") - 1, 0,
                          len(cp.subpaths) - 1)
        breaks = [int(i) for i in range(n - 1) if sub_idx[i] != sub_idx[i + 1]]
    return SampledPolyline(pts, cp.length / (n - 1), cp.closed, tuple(breaks))


def path_length(path) -> float:
    """Total arc length, summed over subpaths."""
    return _as_compiled(path).length


def path_area(path) -> Optional[float]:
    """Unsigned shoelace area of a closed path; None when the path is open.

    Multi-subpath closed paths contribute the sum of their subpath areas.
    """
    cp = _as_compiled(path)
    if not cp.closed or cp.length <= 0:
        return None
    total = 0.0
    for sp in cp.subpaths:
        if sp.length <= 0:
            continue
        s = np.linspace(0.0, sp.length, AREA_SAMPLES, endpoint=False)
        pts = sp.point_at(s)
        x, y = pts[:, 0], pts[:, 1]
        total += 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    return total


def curvature_profile(path, n: int = CURVATURE_INTERVALS) -> CurvatureProfile:
    """Finite-difference curvature at n parameter values.

    For each t in {dt, 2*dt, ...} with dt = 1/n, evaluates the path at
    t - dt, t, t + dt (clamped to [0, 1]) and applies

        k = 2*((x0-x1)(y2-y1) - (y0-y1)(x2-x1)) / sqrt(((x0-x1)^2 + (y0-y1)^2)^3)

    The sign of the cross product is preserved; coincident stencil points
    yield 0 instead of dividing by zero.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cp = _as_compiled(path)
    dt = 1.0 / n
    ts = np.arange(1, n + 1) * dt
    p0 = cp.point_at_fraction(np.clip(ts - dt, 0.0, 1.0))
    p1 = cp.point_at_fraction(ts)
    p2 = cp.point_at_fraction(np.clip(ts + dt, 0.0, 1.0))
    v0 = p0 - p1
    v2 = p2 - p1
    cross = v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]
    # Numerically collinear stencils are exact zeros, not rounding dust.
    collinear = np.abs(cross) <= 1e-12 * np.hypot(v0[:, 0], v0[:, 1]) \
        * np.hypot(v2[:, 0], v2[:, 1])
    cross[collinear] = 0.0
    dist_sq = v0[:, 0] ** 2 + v0[:, 1] ** 2
    denom = np.sqrt(dist_sq ** 3)
    kappa = np.zeros(n)
    ok = denom > 0
    kappa[ok] = 2.0 * cross[ok] / denom[ok]
    return CurvatureProfile(kappa, ts, n, dt)


def median_point(poly: SampledPolyline) -> tuple[float, float]:
    """Coordinate-wise median of the sampled points."""
    if len(poly.points) == 0:
        raise ValueError("empty polyline")
    med = np.median(poly.points, axis=0)
    return (float(med[0]), float(med[1]))


def min_pairwise_distance(a: SampledPolyline, b: SampledPolyline) -> float:
    """Minimum Euclidean distance over all sample-point pairs."""
    return float(cdist(a.points, b.points).min())


def _chord_crossings(p1, q1, p2, q2) -> tuple[np.ndarray, np.ndarray]:
    """All crossing points between chord sets {p1->q1} and {p2->q2}.

    Implements the parametric segment pair test: writing each chord as
    P + t*D, a crossing requires a nonzero determinant (non-parallel),
    both parameter numerators sharing the determinant's sign, and both
    being bounded by it in magnitude (t, u in [0, 1]).
    """
    d1 = q1 - p1                     # (na, 2)
    d2 = q2 - p2                     # (nb, 2)
    det = d1[:, None, 0] * d2[None, :, 1] - d1[:, None, 1] * d2[None, :, 0]
    rx = p2[None, :, 0] - p1[:, None, 0]
    ry = p2[None, :, 1] - p1[:, None, 1]
    t_num = rx * d2[None, :, 1] - ry * d2[None, :, 0]
    u_num = rx * d1[:, None, 1] - ry * d1[:, None, 0]
    hit = (
        (det != 0)
        & (t_num * det >= 0)
        & (u_num * det >= 0)
        & (np.abs(det) >= np.abs(t_num))
        & (np.abs(det) >= np.abs(u_num))
    )
    ii, jj = np.nonzero(hit)
    if len(ii) == 0:
        return np.empty((0, 2)), np.empty(0, dtype=int)
    t = t_num[ii, jj] / det[ii, jj]
    pts = p1[ii] + t[:, None] * d1[ii]
    return pts, ii


def count_intersections(a: SampledPolyline, b: SampledPolyline) -> int:
    """Number of crossing events between the two piecewise-linear samplings.

    Chord-pair hits closer together than one sampling pitch are merged into
    a single event, since one true crossing of curved paths can light up
    several adjacent chord pairs.
    """
    if len(a.points) < 2 or len(b.points) < 2:
        return 0
    p1, q1 = a.chords()
    p2, q2 = b.chords()
    if len(p1) == 0 or len(p2) == 0:
        return 0
    pts, _ = _chord_crossings(p1, q1, p2, q2)
    if len(pts) == 0:
        return 0
    radius = max(a.spacing, b.spacing)
    if radius <= 0:
        radius = 1e-12
    # Greedy single-linkage clustering in a deterministic order.
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    reps: list[np.ndarray] = []
    for p in pts:
        for r in reps:
            if np.hypot(p[0] - r[0], p[1] - r[1]) <= radius:
                break
        else:
            reps.append(p)
    return len(reps)


def is_contiguous(a, b, tol: float) -> bool:
    """True when any subpath endpoint of `a` lies within `tol` of any
    subpath endpoint of `b`."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    ea = _as_compiled(a).endpoints()
    eb = _as_compiled(b).endpoints()
    return bool(cdist(ea, eb).min() <= tol)


def contains(outer, inner, samples: int = NODE_SAMPLES) -> bool:
    """Even-odd containment of every sampled point of `inner` in the closed
    polygon traced by `outer`. Open outer paths contain nothing."""
    ocp = _as_compiled(outer)
    if not ocp.closed or ocp.length <= 0:
        return False
    icp = _as_compiled(inner)
    probes = icp.point_at_fraction(np.linspace(0.0, 1.0, samples))

    inside = np.zeros(len(probes), dtype=bool)
    for sp in ocp.subpaths:
        if sp.length <= 0:
            continue
        s = np.linspace(0.0, sp.length, AREA_SAMPLES, endpoint=False)
        poly = sp.point_at(s)
        x0, y0 = poly[:, 0], poly[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        px = probes[:, 0][:, None]
        py = probes[:, 1][:, None]
        straddles = (y0[None, :] > py) != (y1[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x0[None, :] + (py - y0[None, :]) * (x1 - x0)[None, :] \
                / (y1 - y0)[None, :]
        crossings = np.sum(straddles & (x_cross > px), axis=1)
        inside ^= (crossings % 2).astype(bool)
    return bool(inside.all())
