"""P1 stiffness matrix, boundary and volume loads, Dirichlet elimination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from signolab.fields import Field
from signolab.geometry import BoundarySpec, ConditionTag
from signolab.mesh import TriMesh

# symmetric 6-point rule, exact for degree 4 (Dunavant)
_D4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_a, _b = 0.445948490915965, 0.091576213509771
_D4_P = np.array(
    [
        [_a, _a, 1 - 2 * _a],
        [_a, 1 - 2 * _a, _a],
        [1 - 2 * _a, _a, _a],
        [_b, _b, 1 - 2 * _b],
        [_b, 1 - 2 * _b, _b],
        [1 - 2 * _b, _b, _b],
    ]
)
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def p1_gradients(mesh: TriMesh):
    """Per-triangle basis gradients (T, 3, 2) and areas (T,)."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / (2 * area[:, None])
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / (2 * area[:, None])
    return np.stack([gx, gy], axis=2), area


def element_stiffness(mesh: TriMesh) -> np.ndarray:
    g, area = p1_gradients(mesh)
    return area[:, None, None] * np.einsum("tik,tjk->tij", g, g)


def stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """Assembled ``A_ij = sum_T int_T grad(phi_i) . grad(phi_j)``."""
    ke = element_stiffness(mesh)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    A = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def _boundary_load(mesh: TriMesh, spec: BoundarySpec, tags) -> np.ndarray:
    b = np.zeros(mesh.n_nodes)
    x = 0.5 * (_GAUSS_X + 1.0)
    w = 0.5 * _GAUSS_W
    for k, ((i, j), s, pe, tag) in enumerate(zip(mesh.bedges, mesh.bseg, mesh.bpoly, mesh.btag)):
        if tag not in tags:
            continue
        seg = spec.segments[s]
        if seg.data is None:
            continue
        p, q = mesh.nodes[i], mesh.nodes[j]
        pts = p + x[:, None] * (q - p)
        u = spec.segment_data(s, pe, pts)
        length = float(np.hypot(*(q - p)))
        b[i] += length * np.sum(w * u * (1.0 - x))
        b[j] += length * np.sum(w * u * x)
    return b


def load_control(mesh: TriMesh, spec: BoundarySpec) -> np.ndarray:
    """``b_i = int_{Gamma_U} u phi_i``; Neumann flux data are included the same way."""
    return _boundary_load(mesh, spec, {ConditionTag.CONTROL.value, ConditionTag.NEUMANN.value})


def load_volume(mesh: TriMesh, f: Field | None) -> np.ndarray:
    """``b_i = sum_T int_T f phi_i`` with a degree-4 triangle rule."""
    n = mesh.n_nodes
    if f is None:
        return np.zeros(n)
    p = mesh.nodes[mesh.triangles]
    _, area = p1_gradients(mesh)
    qp = np.einsum("qk,tkd->tqd", _D4_P, p)
    fv = np.asarray(f.value(qp[..., 0], qp[..., 1]), float).reshape(len(p), -1)
    local = area[:, None] * np.einsum("q,tq,qk->tk", _D4_W, fv, _D4_P)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=n)


def load_vector(mesh: TriMesh, spec: BoundarySpec) -> np.ndarray:
    return load_control(mesh, spec) + load_volume(mesh, spec.load)


@dataclass(frozen=True, eq=False)
class DofPartition:
    dirichlet: np.ndarray
    signorini: np.ndarray
    free: np.ndarray
    lifting: np.ndarray  # g_D at dirichlet nodes
    n: int

    @property
    def unknowns(self) -> np.ndarray:
        """Non-Dirichlet nodes in increasing order."""
        return np.union1d(self.signorini, self.free)

    def lifting_vector(self) -> np.ndarray:
        g = np.zeros(self.n)
        g[self.dirichlet] = self.lifting
        return g


def _node_data(mesh: TriMesh, spec: BoundarySpec, tag: str) -> dict:
    vals = {}
    for (i, j), s, pe, t in zip(mesh.bedges, mesh.bseg, mesh.bpoly, mesh.btag):
        if t != tag:
            continue
        v = spec.segment_data(s, pe, mesh.nodes[[i, j]])
        vals.setdefault(int(i), float(v[0]))
        vals.setdefault(int(j), float(v[1]))
    return vals


def partition(mesh: TriMesh, spec: BoundarySpec) -> DofPartition:
    """Dirichlet wins at D/S junctions; S wins over N and U."""
    dvals = _node_data(mesh, spec, ConditionTag.DIRICHLET.value)
    dirichlet = np.array(sorted(dvals), dtype=np.int64)
    sig = np.setdiff1d(mesh.nodes_with_tag("S"), dirichlet)
    rest = np.setdiff1d(np.arange(mesh.n_nodes), np.union1d(dirichlet, sig))
    return DofPartition(dirichlet, sig, rest, np.array([dvals[i] for i in dirichlet]), mesh.n_nodes)


def obstacle(mesh: TriMesh, spec: BoundarySpec, part: DofPartition) -> np.ndarray:
    """Gap values psi at the Signorini nodes of ``part``."""
    vals = _node_data(mesh, spec, ConditionTag.SIGNORINI.value)
    return np.array([vals[i] for i in part.signorini], dtype=float)


def reduce_dirichlet(A, b, part: DofPartition):
    """Eliminate Dirichlet rows/columns.

    Returns ``(A_red, b_red, lifting)`` where ``lifting`` is the full-length
    vector carrying g_D and the reduced unknowns are ``part.unknowns``.
    """
    g = part.lifting_vector()
    idx = part.unknowns
    A = sp.csr_matrix(A)
    A_red = A[idx][:, idx]
    b_red = np.asarray(b, float)[idx] - (A @ g)[idx]
    return A_red.tocsr(), b_red, g


def dump_coo(A) -> str:
    """Coordinate text dump, one ``row col value`` per line."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    return "".join(f"{r} {c} {v!r}\n" for r, c, v in zip(C.row[order], C.col[order], C.data[order].tolist()))
