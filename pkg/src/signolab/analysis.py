"""Coincidence-set extraction, complementarity diagnostics, the singular
exponent table and log-log exponent fits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from signolab.geometry import BoundarySpec, ConditionTag, CriticalPoint, critical_points
from signolab.mesh import TriMesh
from signolab.vi_solver import DiscreteSolution

ENDPOINT = "endpoint"
JUNCTION_TOL = 1e-12


class AnalysisError(RuntimeError):
    pass


class InvalidIndex(ValueError):
    pass


class WindowTooNarrow(AnalysisError):
    pass


class SingularityNotExcited(AnalysisError):
    pass


# ---------------------------------------------------------------- boundary walk


def boundary_walk(mesh: TriMesh):
    """Boundary cycle with per-edge tag and global arclength of each node."""
    cyc = mesh.boundary_cycle
    tag_of = {(int(a), int(b)): str(t) for (a, b), t in zip(mesh.bedges, mesh.btag)}
    nxt = np.roll(cyc, -1)
    tags = [tag_of[(int(a), int(b))] for a, b in zip(cyc, nxt)]
    seg = np.linalg.norm(mesh.nodes[nxt] - mesh.nodes[cyc], axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    return cyc, tags, s, float(seg.sum())


def signorini_chains(mesh: TriMesh):
    """Maximal runs of Signorini boundary edges as ``(nodes, arclength)`` pairs.

    Arclength is measured counterclockwise from polygon vertex 0 and made
    monotone along chains that wrap past it.
    """
    cyc, tags, s, perimeter = boundary_walk(mesh)
    m = len(cyc)
    is_s = [t == ConditionTag.SIGNORINI.value for t in tags]
    if not any(is_s):
        return []
    if all(is_s):
        raise AnalysisError("boundary is entirely Signorini")
    start = next(k for k in range(m) if not is_s[k])
    chains = []
    k = 0
    while k < m:
        e = (start + k) % m
        if not is_s[e]:
            k += 1
            continue
        nodes, arc = [int(cyc[e])], [s[e]]
        while k < m and is_s[(start + k) % m]:
            e = (start + k) % m
            nxt = (e + 1) % m
            nodes.append(int(cyc[nxt]))
            arc.append(s[nxt] if nxt != 0 else perimeter)
            k += 1
        arc = np.array(arc)
        arc[1:] += perimeter * (np.diff(arc) < 0).cumsum()
        chains.append((np.array(nodes), arc))
    return chains


# ------------------------------------------------------------ coincidence sets


@dataclass
class CoincidenceReport:
    level: int
    h: float
    intervals: list = field(default_factory=list)  # (s_start, s_end) arclength pairs
    interval_points: list = field(default_factory=list)  # ((x0, y0), (x1, y1))
    isolated: list = field(default_factory=list)  # (s, (x, y))
    endpoints: list = field(default_factory=list)  # transition points (x, y)

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    @property
    def n_isolated(self) -> int:
        return len(self.isolated)

    def to_json(self) -> dict:
        d = asdict(self)
        d["n_intervals"] = self.n_intervals
        d["n_isolated"] = self.n_isolated
        return d


def _gap_at(spec, mesh, node):
    if spec is None:
        return 0.0
    for (a, b), s, pe, t in zip(mesh.bedges, mesh.bseg, mesh.bpoly, mesh.btag):
        if t == "S" and node in (a, b):
            return float(spec.segment_data(int(s), int(pe), mesh.nodes[[node]])[0])
    return 0.0


def contact_flags(sol: DiscreteSolution, mesh: TriMesh, nodes, spec: BoundarySpec | None = None):
    """Contact classification along a chain of boundary nodes."""
    active = set(int(i) for i in sol.active)
    psi_of = dict(zip(sol.signorini.tolist(), sol.psi.tolist()))
    flags = np.zeros(len(nodes), bool)
    junction = []
    for k, v in enumerate(nodes):
        if v in psi_of:
            flags[k] = v in active or sol.y[v] == psi_of[v]
        else:
            junction.append(k)
    # Dirichlet chain ends are not in Gamma_S; they only extend an adjacent contact run
    for k in junction:
        nb = k + 1 if k == 0 else k - 1
        if 0 <= nb < len(nodes) and nodes[nb] in psi_of and flags[nb]:
            psi = _gap_at(spec, mesh, nodes[k])
            flags[k] = sol.y[nodes[k]] - psi <= JUNCTION_TOL * max(1.0, abs(psi))
    return flags


def extract_coincidence(
    sol: DiscreteSolution, mesh: TriMesh, spec: BoundarySpec | None = None, h: float | None = None
) -> CoincidenceReport:
    """Group contact nodes along each Signorini chain into intervals and isolated points."""
    rep = CoincidenceReport(level=mesh.level, h=mesh.max_edge() if h is None else h)
    for nodes, arc in signorini_chains(mesh):
        flags = contact_flags(sol, mesh, nodes, spec)
        pts = mesh.nodes[nodes]
        k = 0
        n = len(nodes)
        while k < n:
            if not flags[k]:
                k += 1
                continue
            j = k
            while j + 1 < n and flags[j + 1]:
                j += 1
            if j == k and 0 < k < n - 1:
                rep.isolated.append((float(arc[k]), tuple(pts[k].tolist())))
            else:
                if k > 0:
                    s0 = 0.5 * (arc[k - 1] + arc[k])
                    p0 = 0.5 * (pts[k - 1] + pts[k])
                    rep.endpoints.append(tuple(p0.tolist()))
                else:
                    s0, p0 = arc[0], pts[0]
                if j < n - 1:
                    s1 = 0.5 * (arc[j] + arc[j + 1])
                    p1 = 0.5 * (pts[j] + pts[j + 1])
                    rep.endpoints.append(tuple(p1.tolist()))
                else:
                    s1, p1 = arc[-1], pts[-1]
                rep.intervals.append((float(s0), float(s1)))
                rep.interval_points.append((tuple(np.asarray(p0).tolist()), tuple(np.asarray(p1).tolist())))
            k = j + 1
    return rep


@dataclass
class StabilityVerdict:
    stable: bool
    n_intervals: int
    n_isolated: int
    max_endpoint_shift: float
    reason: str = ""


def component_stability(reports: list) -> StabilityVerdict:
    """Stable iff the component counts agree on the last two levels and the
    endpoints move by at most 2h between consecutive levels."""
    if len(reports) < 3:
        raise ValueError("component_stability needs at least 3 refinement levels")
    last, prev = reports[-1], reports[-2]
    shift = 0.0
    if (last.n_intervals, last.n_isolated) != (prev.n_intervals, prev.n_isolated):
        return StabilityVerdict(False, last.n_intervals, last.n_isolated, math.inf, "component count changed")
    for a, b in zip(reports, reports[1:]):
        if len(a.endpoints) != len(b.endpoints) or (a.n_intervals, a.n_isolated) != (b.n_intervals, b.n_isolated):
            continue
        if not a.endpoints:
            continue
        d = np.linalg.norm(np.array(a.endpoints) - np.array(b.endpoints), axis=1).max()
        shift = max(shift, float(d))
        if d > 2 * max(a.h, b.h):
            return StabilityVerdict(False, last.n_intervals, last.n_isolated, shift, "endpoint moved more than 2h")
    if len(last.endpoints) != len(prev.endpoints):
        return StabilityVerdict(False, last.n_intervals, last.n_isolated, math.inf, "endpoint count changed")
    return StabilityVerdict(True, last.n_intervals, last.n_isolated, shift)


# ------------------------------------------------------- complementarity product


@dataclass
class ComplementarityReport:
    value: float
    arclength: np.ndarray
    tangential: np.ndarray
    flux: np.ndarray
    product: np.ndarray
    nodes: np.ndarray

    def bound(self) -> float:
        if len(self.product) == 0:
            return 0.0
        return float(np.abs(self.tangential).max() * np.abs(self.flux).max())


def complementarity_product(
    sol: DiscreteSolution, mesh: TriMesh, centers, delta: float
) -> ComplementarityReport:
    """Max of |dy/dt * flux| over Signorini nodes farther than ``delta`` from every center."""
    if not delta > 0:
        raise ValueError("exclusion radius must be positive")
    centers = np.array([c.location if isinstance(c, CriticalPoint) else c for c in centers], float).reshape(-1, 2)
    lam = sol.multiplier_full()
    is_sig = np.zeros(mesh.n_nodes, bool)
    is_sig[sol.signorini] = True
    rows = []
    for nodes, arc in signorini_chains(mesh):
        pts = mesh.nodes[nodes]
        seglen = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        for k, v in enumerate(nodes):
            if not is_sig[v]:
                continue
            if len(centers) and np.min(np.linalg.norm(centers - pts[k], axis=1)) < delta:
                continue
            if k + 1 < len(nodes):
                t = (sol.y[nodes[k + 1]] - sol.y[v]) / seglen[k]
            else:
                t = (sol.y[v] - sol.y[nodes[k - 1]]) / seglen[k - 1]
            mass = 0.5 * ((seglen[k - 1] if k > 0 else 0.0) + (seglen[k] if k < len(seglen) else 0.0))
            n = lam[v] / mass
            rows.append((arc[k], t, n, t * n, v))
    if not rows:
        e = np.zeros(0)
        return ComplementarityReport(0.0, e, e, e, e, np.zeros(0, np.int64))
    a = np.array(rows)
    return ComplementarityReport(
        float(np.abs(a[:, 3]).max()), a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4].astype(np.int64)
    )


# ------------------------------------------------------------ exponent table

_FULL = {frozenset("D"), frozenset("N"), frozenset("U"), frozenset("UN")}
_HALF = {frozenset("DN"), frozenset("DU")}
_SIGNORINI_ONE_SIDED = {frozenset("SD"), frozenset("SN")}


def _pair_key(pair):
    if pair == ENDPOINT or (isinstance(pair, tuple) and pair and pair[0] == ENDPOINT):
        return ENDPOINT
    a, b = (ConditionTag(str(p)).value for p in pair)
    return frozenset(a + b)


def singular_exponent_table(pair, alpha: float, j: int) -> float:
    """Singular exponent ``lambda_j`` for a pair of boundary conditions meeting at angle ``alpha``."""
    key = _pair_key(pair)
    if key == ENDPOINT:
        if j != 1:
            raise InvalidIndex("only the leading endpoint exponent (j = 1) is known")
        return 1.5
    if not 0 < alpha < 2 * math.pi:
        raise ValueError("angle must lie in (0, 2 pi)")
    if key in _FULL:
        lo, lam = 1, j * math.pi / alpha
    elif key in _HALF:
        lo, lam = 1, (j - 0.5) * math.pi / alpha
    elif key == frozenset("S"):
        lo, lam = 2, j * math.pi / (2 * alpha)
    elif key in _SIGNORINI_ONE_SIDED:
        lo, lam = 1, j * math.pi / (2 * alpha)
    else:
        raise ValueError(f"no table row for condition pair {sorted(key)}")
    if j < lo:
        raise InvalidIndex(f"j must be >= {lo} for this row")
    return lam


def first_index(pair) -> int:
    key = _pair_key(pair)
    return 2 if key == frozenset("S") else 1


def predicted_leading_exponent(cp: CriticalPoint):
    """Smallest table exponent different from 1, with its index ``j``."""
    if cp.kind == ENDPOINT:
        return 1.5, 1
    j = first_index(cp.pair)
    while True:
        lam = singular_exponent_table(cp.pair, cp.angle, j)
        if abs(lam - 1.0) > 1e-12:
            return lam, j
        j += 1


def endpoint_point(location, direction: float) -> CriticalPoint:
    """Critical point for a coincidence endpoint on a straight Signorini edge."""
    return CriticalPoint(tuple(location), math.pi, (ENDPOINT,), ENDPOINT, -1, direction)


def exceptional_p(angles) -> list:
    """Sorted distinct values ``2 / (2 - k pi / (2 alpha)) > 2``."""
    out = set()
    for alpha in angles:
        if not 0 < alpha < 2 * math.pi:
            raise ValueError("angle must lie in (0, 2 pi)")
        k = 1
        while True:
            q = k * math.pi / (2 * alpha)
            if round(q, 12) >= 2:
                break
            p = round(2.0 / (2.0 - q), 12)
            if p > 2:
                out.add(p)
            k += 1
    return sorted(out)


# ---------------------------------------------------------------- exponent fit


@dataclass
class ExponentReport:
    location: tuple
    exponent: float
    predicted: float | None
    r_min: float
    r_max: float
    arcs: int
    r_squared: float
    arc_norm_at_rmax: float
    radii: list = field(default_factory=list)
    norms: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _local_size(mesh: TriMesh, c) -> float:
    d = np.hypot(mesh.nodes[:, 0] - c[0], mesh.nodes[:, 1] - c[1])
    i = int(np.argmin(d))
    if d[i] <= 1e-12 * max(1.0, float(np.abs(mesh.nodes).max())):
        return mesh.local_size(i)
    tri, _ = mesh.locate([c])
    if tri[0] < 0:
        raise AnalysisError("fit center is outside the mesh")
    p = mesh.nodes[mesh.triangles[tri[0]]]
    return float(np.linalg.norm(p - np.roll(p, 1, axis=0), axis=1).max())


def arc_norms(y, mesh: TriMesh, cp: CriticalPoint, radii, samples: int = 64):
    """Angular L2 norm of ``y - y(c)`` on arcs of the given radii inside the corner sector."""
    c = np.asarray(cp.location, float)
    yc = float(mesh.interpolate(y, [c])[0])
    theta = cp.direction + cp.angle * (np.arange(samples) + 0.5) / samples
    out = []
    for r in radii:
        pts = c + r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        tri, bary = mesh.locate(pts)
        ok = tri >= 0
        if not ok.any():
            out.append(0.0)
            continue
        vals = np.sum(np.asarray(y, float)[mesh.triangles[tri[ok]]] * bary[ok], axis=1)
        out.append(math.sqrt(cp.angle * float(np.mean((vals - yc) ** 2))))
    return np.array(out)


def default_window(mesh: TriMesh, cp: CriticalPoint, others) -> tuple:
    c = np.asarray(cp.location, float)
    pts = np.array([o.location if isinstance(o, CriticalPoint) else o for o in others], float).reshape(-1, 2)
    d = np.linalg.norm(pts - c, axis=1) if len(pts) else np.array([])
    d = d[d > 1e-12]
    if len(d) == 0:
        raise AnalysisError("no other critical point to bound the fit window")
    return 4.0 * _local_size(mesh, c), 0.5 * float(d.min())


def fit_exponent(
    y,
    mesh: TriMesh,
    cp: CriticalPoint,
    spec: BoundarySpec | None = None,
    window=None,
    arcs: int | None = None,
    samples: int = 64,
    others=None,
) -> ExponentReport:
    """Least-squares slope of log(arc norm) against log(radius) near ``cp``."""
    y = np.asarray(y, float)
    if others is None:
        if spec is not None:
            others = [p.location for p in critical_points(spec)]
        else:
            others = [tuple(p) for p in mesh.nodes[mesh.vertex_nodes]]
    c = np.asarray(cp.location, float)
    h_loc = _local_size(mesh, c)
    r_min_d, r_max_d = default_window(mesh, cp, others)
    r_min, r_max = (r_min_d, r_max_d) if window is None else (float(window[0]), float(window[1]))
    if r_min < 2 * h_loc * (1 - 1e-12) or r_max > r_max_d * (1 + 1e-12):
        raise ValueError(
            f"window [{r_min:.3g}, {r_max:.3g}] violates r_min >= 2h ({2 * h_loc:.3g}) "
            f"or r_max <= half the distance to the next critical point ({r_max_d:.3g})"
        )
    if arcs is None:
        count = int(math.floor(math.log(r_max / r_min) / math.log(math.sqrt(2.0)) + 1e-9)) + 1 if r_max > r_min else 1
    else:
        count = int(arcs)
    if count < 4:
        raise WindowTooNarrow(f"only {count} arcs fit in [{r_min:.3g}, {r_max:.3g}]")
    radii = np.geomspace(r_min, r_max, count)
    g = arc_norms(y, mesh, cp, radii, samples)
    ymax = float(np.abs(y).max())
    if ymax == 0.0 or g[-1] <= 1e-8 * ymax:
        raise SingularityNotExcited(f"arc norm at r_max is {g[-1]:.3e} (|y|_inf = {ymax:.3e})")
    use = g > 0
    if use.sum() < 4:
        raise WindowTooNarrow("fewer than 4 arcs with a nonzero norm")
    lx, ly = np.log(radii[use]), np.log(g[use])
    slope, icpt = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + icpt)
    tot = ly - ly.mean()
    r2 = 1.0 - float(res @ res) / float(tot @ tot) if float(tot @ tot) > 0 else 1.0
    try:
        predicted = predicted_leading_exponent(cp)[0]
    except ValueError:
        predicted = None
    return ExponentReport(
        tuple(float(v) for v in c),
        float(slope),
        predicted,
        float(r_min),
        float(r_max),
        int(use.sum()),
        max(0.0, min(1.0, r2)),
        float(g[-1]),
        radii.tolist(),
        g.tolist(),
    )


def endpoint_critical_points(report: CoincidenceReport, mesh: TriMesh) -> list:
    """Turn detected coincidence endpoints into critical points with alpha = pi."""
    out = []
    for p in report.endpoints:
        p = np.asarray(p)
        best = None
        for (a, b), t in zip(mesh.bedges, mesh.btag):
            if t != "S":
                continue
            pa, pb = mesh.nodes[a], mesh.nodes[b]
            d = np.linalg.norm(0.5 * (pa + pb) - p)
            if best is None or d < best[0]:
                best = (d, math.atan2(pb[1] - pa[1], pb[0] - pa[0]))
        out.append(endpoint_point(tuple(p.tolist()), best[1]))
    return out
