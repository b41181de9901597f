"""Glue used by the CLI and the acceptance suite: mesh hierarchies, solves,
and discretization errors against closed-form solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from signolab import assembly
from signolab.fields import Field
from signolab.geometry import BoundarySpec, validate_boundary
from signolab.mesh import GradingParams, TriMesh, grade, refine_red, triangulate
from signolab.vi_solver import DiscreteSolution, SolverOptions, kkt_residuals, solve_signorini


@dataclass
class LevelResult:
    mesh: TriMesh
    A: object
    b: np.ndarray
    part: assembly.DofPartition
    psi: np.ndarray
    sol: DiscreteSolution
    h: float

    def kkt(self):
        return kkt_residuals(self.sol.y, self.A, self.b, self.part, self.psi)


def mesh_hierarchy(spec: BoundarySpec, h: float, levels: int, grading=()) -> list:
    """``levels`` meshes: a triangulation at size ``h`` and its red refinements.

    Grading (a list of GradingParams) is applied to each level separately so
    every level is graded from its own uniform parent.  Returns a list of
    ``(mesh, h_level)``.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    base = triangulate(validate_boundary(spec), h)
    out = []
    m = base
    for k in range(levels):
        hk = m.max_edge()
        g = m
        for params in grading:
            g = grade(g, params)
        out.append((g, hk))
        if k + 1 < levels:
            m = refine_red(m)
    return out


def solve_on(mesh: TriMesh, spec: BoundarySpec, h: float | None = None, opts: SolverOptions | None = None) -> LevelResult:
    A = assembly.stiffness(mesh)
    b = assembly.load_vector(mesh, spec)
    part = assembly.partition(mesh, spec)
    psi = assembly.obstacle(mesh, spec, part)
    sol = solve_signorini(A, b, part, psi, opts)
    return LevelResult(mesh, A, b, part, psi, sol, mesh.max_edge() if h is None else h)


def solve_levels(spec: BoundarySpec, h: float, levels: int, grading=(), opts=None) -> list:
    return [solve_on(m, spec, hk, opts) for m, hk in mesh_hierarchy(spec, h, levels, grading)]


# Duffy-collapsed Gauss rule on the reference triangle, exact to high degree
def _triangle_rule(n: int = 6):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    l1 = u.ravel()
    l2 = (v * (1 - u)).ravel()
    weight = (wu * wv * (1 - u)).ravel() * 2.0  # reference area 1/2 -> weights sum to 1
    bary = np.stack([1 - l1 - l2, l1, l2], axis=1)
    return bary, weight


def discretization_errors(mesh: TriMesh, y: np.ndarray, exact: Field, order: int = 6):
    """H1-seminorm and L2 errors of the P1 function ``y`` against ``exact``."""
    bary, w = _triangle_rule(order)
    p = mesh.nodes[mesh.triangles]
    qp = np.einsum("qk,tkd->tqd", bary, p)
    grads, area = assembly.p1_gradients(mesh)
    yt = np.asarray(y, float)[mesh.triangles]
    yh = yt @ bary.T
    gh = np.einsum("tk,tkd->td", yt, grads)
    ye = exact.value(qp[..., 0], qp[..., 1])
    gx, gy = exact.grad(qp[..., 0], qp[..., 1])
    l2 = np.sum(area[:, None] * w * (ye - yh) ** 2)
    h1 = np.sum(area[:, None] * w * ((gx - gh[:, None, 0]) ** 2 + (gy - gh[:, None, 1]) ** 2))
    return float(np.sqrt(h1)), float(np.sqrt(l2))


def fitted_rate(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
