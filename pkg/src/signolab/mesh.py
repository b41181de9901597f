"""Conforming P1 triangulations: ear clipping, longest-edge bisection,
red refinement and radial grading toward a corner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from signolab.geometry import BoundarySpec, ConditionTag, CriticalPoint, _orient


class MeshError(ValueError):
    pass


class DegenerateGeometry(MeshError):
    pass


class TangledMesh(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangle mesh.

    ``bedges`` holds boundary edges oriented counterclockwise (domain on the
    left); ``bseg``/``bpoly``/``btag`` give the owning segment, polygon edge
    and condition tag of each.  The first ``len(vertex_nodes)`` polygon
    vertices are always mesh nodes.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    bedges: np.ndarray
    bseg: np.ndarray
    bpoly: np.ndarray
    btag: np.ndarray
    vertex_nodes: np.ndarray
    level: int = 0
    parent: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        for name, dtype in (
            ("nodes", float),
            ("triangles", np.int64),
            ("bedges", np.int64),
            ("bseg", np.int64),
            ("bpoly", np.int64),
            ("btag", "<U1"),
            ("vertex_nodes", np.int64),
        ):
            arr = np.array(getattr(self, name), dtype=dtype)
            if name in ("triangles", "bedges", "nodes"):
                arr = arr.reshape(-1, 3 if name == "triangles" else 2)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    def max_edge(self) -> float:
        return float(self.edge_lengths().max())

    @cached_property
    def node_tags(self) -> list:
        tags = [set() for _ in range(self.n_nodes)]
        for (a, b), t in zip(self.bedges, self.btag):
            tags[a].add(ConditionTag(t))
            tags[b].add(ConditionTag(t))
        return [frozenset(s) for s in tags]

    def nodes_with_tag(self, tag) -> np.ndarray:
        tag = ConditionTag(tag)
        mask = self.btag == tag.value
        return np.unique(self.bedges[mask].ravel())

    @cached_property
    def boundary_cycle(self) -> np.ndarray:
        """Boundary nodes in counterclockwise order starting at polygon vertex 0."""
        nxt = {int(a): int(b) for a, b in self.bedges}
        start = int(self.vertex_nodes[0])
        out = [start]
        cur = nxt[start]
        while cur != start:
            out.append(cur)
            cur = nxt[cur]
        return np.array(out)

    def node_index(self, point, tol=1e-12) -> int:
        d = np.hypot(self.nodes[:, 0] - point[0], self.nodes[:, 1] - point[1])
        i = int(np.argmin(d))
        if d[i] > tol * max(1.0, float(np.abs(self.nodes).max())):
            raise MeshError(f"point {tuple(point)} is not a mesh node")
        return i

    def local_size(self, node: int) -> float:
        """Longest edge incident to ``node``."""
        e = self.edges
        mask = (e[:, 0] == node) | (e[:, 1] == node)
        return float(self.edge_lengths()[mask].max())

    @cached_property
    def _buckets(self):
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        m = max(1, int(math.sqrt(self.n_triangles) / 2))
        size = (hi - lo) / m
        size[size == 0] = 1.0
        p = self.nodes[self.triangles]
        tlo = np.floor((p.min(axis=1) - lo) / size).astype(int).clip(0, m - 1)
        thi = np.floor((p.max(axis=1) - lo) / size).astype(int).clip(0, m - 1)
        grid: dict = {}
        for t in range(self.n_triangles):
            for i in range(tlo[t, 0], thi[t, 0] + 1):
                for j in range(tlo[t, 1], thi[t, 1] + 1):
                    grid.setdefault((i, j), []).append(t)
        grid = {k: np.array(v) for k, v in grid.items()}
        return lo, size, m, grid

    def locate(self, points, tol=1e-10):
        """Containing triangle and barycentric coordinates for each point.

        Returns ``(tri, bary)``; ``tri`` is -1 for points outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(points, float))
        lo, size, m, grid = self._buckets
        tri = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        cells = np.floor((pts - lo) / size).astype(int).clip(0, m - 1)
        for k, (p, c) in enumerate(zip(pts, cells)):
            cand = grid.get((int(c[0]), int(c[1])))
            if cand is None:
                continue
            v = self.nodes[self.triangles[cand]]
            b = _barycentric(v, p)
            score = b.min(axis=1)
            best = int(np.argmax(score))
            if score[best] >= -tol:
                tri[k] = cand[best]
                bary[k] = b[best]
        return tri, bary

    def interpolate(self, values, points) -> np.ndarray:
        tri, bary = self.locate(points)
        if np.any(tri < 0):
            raise MeshError("interpolation point outside the mesh")
        vals = np.asarray(values, float)[self.triangles[tri]]
        return np.sum(vals * bary, axis=1)


def _barycentric(v: np.ndarray, p) -> np.ndarray:
    a, b, c = v[:, 0], v[:, 1], v[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    l1 = ((b[:, 0] - p[0]) * (c[:, 1] - p[1]) - (b[:, 1] - p[1]) * (c[:, 0] - p[0])) / det
    l2 = ((c[:, 0] - p[0]) * (a[:, 1] - p[1]) - (c[:, 1] - p[1]) * (a[:, 0] - p[0])) / det
    return np.stack([l1, l2, 1.0 - l1 - l2], axis=1)


def check_mesh(mesh: TriMesh) -> None:
    """Raise MeshError unless the mesh is conforming, positive and Euler-consistent."""
    if np.any(mesh.areas() <= 0):
        raise MeshError("non-positive triangle area")
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    bnd = {tuple(x) for x in uniq[counts == 1]}
    tagged = {tuple(sorted(x)) for x in mesh.bedges.tolist()}
    if bnd != tagged:
        raise MeshError("boundary edges do not match tagged edges")
    v, ne, f = mesh.n_nodes, len(uniq), mesh.n_triangles
    if v - ne + f != 1:
        raise MeshError(f"Euler characteristic {v - ne + f} != 1")


# ---------------------------------------------------------------- ear clipping


def _angles(p0, p1, p2):
    def ang(a, b, c):
        u = np.subtract(b, a)
        w = np.subtract(c, a)
        return math.atan2(abs(u[0] * w[1] - u[1] * w[0]), float(np.dot(u, w)))

    return ang(p0, p1, p2), ang(p1, p2, p0), ang(p2, p0, p1)


def ear_clip(points) -> list:
    """Triangulate a simple counterclockwise polygon, best-quality ear first."""
    pts = [tuple(p) for p in points]
    idx = list(range(len(pts)))
    scale = max(max(abs(c) for c in p) for p in pts) or 1.0
    tris = []
    while len(idx) > 3:
        best = None
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _orient(a, b, c) <= 1e-14 * scale * scale:
                continue
            blocked = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if _orient(a, b, p) >= 0 and _orient(b, c, p) >= 0 and _orient(c, a, p) >= 0:
                    blocked = True
                    break
            if blocked:
                continue
            q = min(_angles(a, b, c))
            if best is None or q > best[0] + 1e-12:
                best = (q, k)
        if best is None:
            raise DegenerateGeometry("ear clipping failed; polygon is not simple")
        k = best[1]
        tris.append((idx[(k - 1) % m], idx[k], idx[(k + 1) % m]))
        del idx[k]
    a, b, c = (pts[i] for i in idx)
    if _orient(a, b, c) <= 0:
        raise DegenerateGeometry("ear clipping left a degenerate triangle")
    tris.append(tuple(idx))
    return tris


# ------------------------------------------------------------ LEPP bisection


class _Bisector:
    def __init__(self, nodes, tris, boundary):
        self.nodes = [tuple(p) for p in nodes]
        self.tris = [list(t) for t in tris]
        self.boundary = dict(boundary)  # (a, b) oriented -> (segment, polygon edge)
        self.edge_tris: dict = {}
        for t, tri in enumerate(self.tris):
            for e in self._edges(tri):
                self.edge_tris.setdefault(e, []).append(t)

    @staticmethod
    def _edges(tri):
        a, b, c = tri
        return [tuple(sorted((a, b))), tuple(sorted((b, c))), tuple(sorted((c, a)))]

    def _key(self, e):
        p, q = self.nodes[e[0]], self.nodes[e[1]]
        return (round(math.hypot(q[0] - p[0], q[1] - p[1]), 12), e)

    def longest(self, t):
        return max(self._edges(self.tris[t]), key=self._key)

    def length(self, e):
        p, q = self.nodes[e[0]], self.nodes[e[1]]
        return math.hypot(q[0] - p[0], q[1] - p[1])

    def bisect(self, e):
        a, b = e
        pa, pb = self.nodes[a], self.nodes[b]
        m = len(self.nodes)
        self.nodes.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
        for t in list(self.edge_tris.pop(e)):
            tri = self.tris[t]
            for e2 in self._edges(tri):
                if e2 != e:
                    self.edge_tris[e2].remove(t)
            # rotate so the split edge is (tri[0], tri[1])
            while {tri[0], tri[1]} != {a, b}:
                tri = tri[1:] + tri[:1]
            u, v, w = tri
            c1 = [u, m, w]
            c2 = [m, v, w]
            self.tris[t] = c1
            self.tris.append(c2)
            t2 = len(self.tris) - 1
            for tt, child in ((t, c1), (t2, c2)):
                for e2 in self._edges(child):
                    self.edge_tris.setdefault(e2, []).append(tt)
        for oriented in ((a, b), (b, a)):
            if oriented in self.boundary:
                info = self.boundary.pop(oriented)
                u, v = oriented
                self.boundary[(u, m)] = info
                self.boundary[(m, v)] = info

    def refine(self, h):
        t = 0
        while t < len(self.tris):
            while self.length(self.longest(t)) > h:
                self._lepp_step(t)
            t += 1

    def _lepp_step(self, t):
        cur = t
        while True:
            e = self.longest(cur)
            nbs = [s for s in self.edge_tris[e] if s != cur]
            if not nbs or self.longest(nbs[0]) == e:
                self.bisect(e)
                return
            cur = nbs[0]


def _smooth_once(nodes, tris, fixed, h=math.inf):
    nodes = np.array(nodes, float)
    tris = np.asarray(tris)
    n = len(nodes)
    nbrs = [set() for _ in range(n)]
    node_tris = [[] for _ in range(n)]
    for t, (a, b, c) in enumerate(tris):
        nbrs[a].update((b, c))
        nbrs[b].update((a, c))
        nbrs[c].update((a, b))
        for v in (a, b, c):
            node_tris[v].append(t)

    def quality(ts):
        worst = math.pi
        for t in ts:
            p = nodes[tris[t]]
            if _orient(*p) <= 0:
                return -1.0
            worst = min(worst, min(_angles(*p)))
        return worst

    for v in range(n):
        if fixed[v] or not nbrs[v]:
            continue
        old = nodes[v].copy()
        q_old = quality(node_tris[v])
        nb = sorted(nbrs[v])
        nodes[v] = nodes[nb].mean(axis=0)
        # the move must not stretch an edge past the size target
        too_long = np.hypot(*(nodes[nb] - nodes[v]).T).max() > h
        if too_long or quality(node_tris[v]) < q_old:
            nodes[v] = old
    return nodes


def triangulate(spec: BoundarySpec, h: float, smooth: bool = True) -> TriMesh:
    """Conforming mesh of the spec's polygon with every edge no longer than ``h``."""
    if not h > 0:
        raise ValueError("target size h must be positive")
    poly = spec.polygon
    n = poly.n
    tris = ear_clip(poly.vertices)
    boundary = {(k, (k + 1) % n): (spec.edge_segment(k), k) for k in range(n)}
    bis = _Bisector(poly.vertices, tris, boundary)
    bis.refine(h)
    nodes = np.array(bis.nodes)
    tris = np.array(bis.tris, dtype=np.int64)
    bedges = np.array(list(bis.boundary.keys()), dtype=np.int64)
    info = np.array(list(bis.boundary.values()), dtype=np.int64)
    order = _boundary_order(bedges, start=0)
    bedges, info = bedges[order], info[order]
    if smooth:
        fixed = np.zeros(len(nodes), bool)
        fixed[bedges.ravel()] = True
        nodes = _smooth_once(nodes, tris, fixed, h)
    btag = np.array([spec.segments[s].tag.value for s in info[:, 0]])
    mesh = TriMesh(nodes, tris, bedges, info[:, 0], info[:, 1], btag, np.arange(n), level=0)
    check_mesh(mesh)
    return mesh


def _boundary_order(bedges: np.ndarray, start: int) -> np.ndarray:
    """Permutation putting oriented boundary edges in walking order from ``start``."""
    by_tail = {int(a): k for k, (a, _) in enumerate(bedges)}
    order = []
    cur = start
    for _ in range(len(bedges)):
        k = by_tail[cur]
        order.append(k)
        cur = int(bedges[k, 1])
    return np.array(order)


# --------------------------------------------------------------- red refinement


def refine_red(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four congruent children via edge midpoints."""
    t = mesh.triangles
    n = mesh.n_nodes
    nt = len(t)
    local = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    uniq, inv = np.unique(np.sort(local, axis=1), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = n + inv.reshape(3, nt).T  # columns: m01, m12, m20
    new_nodes = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nodes = np.vstack([mesh.nodes, new_nodes])
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    mab, mbc, mca = mids[:, 0], mids[:, 1], mids[:, 2]
    children = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    keys = uniq[:, 0] * (n + 1) + uniq[:, 1]
    be = mesh.bedges
    bkeys = np.minimum(be[:, 0], be[:, 1]) * (n + 1) + np.maximum(be[:, 0], be[:, 1])
    bm = n + np.searchsorted(keys, bkeys)
    bedges = np.stack([np.stack([be[:, 0], bm], axis=1), np.stack([bm, be[:, 1]], axis=1)], axis=1).reshape(-1, 2)
    rep = lambda arr: np.repeat(arr, 2)  # noqa: E731
    parent = {"triangle": np.repeat(np.arange(nt), 4), "edge_nodes": uniq}
    return TriMesh(
        nodes,
        children,
        bedges,
        rep(mesh.bseg),
        rep(mesh.bpoly),
        rep(mesh.btag),
        mesh.vertex_nodes,
        level=mesh.level + 1,
        parent=parent,
    )


# --------------------------------------------------------------------- grading


@dataclass(frozen=True)
class GradingParams:
    center: object  # CriticalPoint or a 2D point
    mu: float
    radius: float

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ValueError("grading exponent mu must lie in (0, 1]")
        if not self.radius > 0:
            raise ValueError("grading radius must be positive")

    @property
    def point(self) -> np.ndarray:
        c = self.center.location if isinstance(self.center, CriticalPoint) else self.center
        return np.asarray(c, float)


def grade(mesh: TriMesh, params: GradingParams) -> TriMesh:
    """Move nodes within ``radius`` of the center so that r -> R (r/R)^(1/mu)."""
    c = params.point
    ic = mesh.node_index(c)
    R = params.radius
    d = mesh.nodes - c
    r = np.hypot(d[:, 0], d[:, 1])
    move = (r < R) & (r > 0)
    factor = np.ones(len(r))
    factor[move] = (r[move] / R) ** (1.0 / params.mu - 1.0)
    nodes = c + d * factor[:, None]
    nodes[ic] = mesh.nodes[ic]
    if params.mu != 1:
        moved_b = np.zeros(len(r), bool)
        moved_b[mesh.bedges.ravel()] = True
        moved_b &= move
        if moved_b.any():
            # boundary nodes may only slide along polygon edges through the center
            from_nodes = mesh.nodes
            for (a, b), pe in zip(mesh.bedges, mesh.bpoly):
                for v in (a, b):
                    if not moved_b[v]:
                        continue
                    p0 = from_nodes[mesh.vertex_nodes[pe]]
                    p1 = from_nodes[mesh.vertex_nodes[(pe + 1) % len(mesh.vertex_nodes)]]
                    span = np.hypot(*(p1 - p0))
                    if abs(_orient(p0, p1, c)) > 1e-12 * span * span:
                        raise MeshError(
                            "grading radius reaches a boundary edge not incident to the center"
                        )
    graded = TriMesh(
        nodes,
        mesh.triangles,
        mesh.bedges,
        mesh.bseg,
        mesh.bpoly,
        mesh.btag,
        mesh.vertex_nodes,
        level=mesh.level,
        parent=mesh.parent,
    )
    if np.any(graded.areas() <= 0):
        raise TangledMesh("grading produced a non-positive triangle; reduce grading strength")
    return graded


# ---------------------------------------------------------------- text format


def export_mesh(mesh: TriMesh) -> str:
    lines = [f"level {mesh.level}", f"vertices {len(mesh.vertex_nodes)}"]
    lines += [str(int(v)) for v in mesh.vertex_nodes]
    lines.append(f"nodes {mesh.n_nodes}")
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"boundary {len(mesh.bedges)}")
    lines += [
        f"{a} {b} {s} {t} {p}"
        for (a, b), s, t, p in zip(mesh.bedges.tolist(), mesh.bseg.tolist(), mesh.btag.tolist(), mesh.bpoly.tolist())
    ]
    return "\n".join(lines) + "\n"


def import_mesh(text: str) -> TriMesh:
    lines = iter(text.splitlines())

    def header(name):
        parts = next(lines).split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshError(f"expected section {name!r}, got {' '.join(parts)!r}")
        return int(parts[1])

    level = header("level")
    vertex_nodes = [int(next(lines)) for _ in range(header("vertices"))]
    nodes = [tuple(float(v) for v in next(lines).split()) for _ in range(header("nodes"))]
    tris = [tuple(int(v) for v in next(lines).split()) for _ in range(header("triangles"))]
    bedges, bseg, btag, bpoly = [], [], [], []
    for _ in range(header("boundary")):
        a, b, s, t, p = next(lines).split()
        bedges.append((int(a), int(b)))
        bseg.append(int(s))
        btag.append(t)
        bpoly.append(int(p))
    return TriMesh(
        np.array(nodes).reshape(-1, 2),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
        np.array(bedges, dtype=np.int64).reshape(-1, 2),
        bseg,
        bpoly,
        btag,
        vertex_nodes,
        level=level,
    )
