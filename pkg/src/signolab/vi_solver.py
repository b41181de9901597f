"""Primal-dual active set solver for the discrete Signorini inequality."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from signolab.assembly import DofPartition

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NoConvergence(SolverError):
    pass


class CycleDetected(SolverError):
    def __init__(self, msg, last_sets=()):
        super().__init__(msg)
        self.last_sets = last_sets


@dataclass
class CGInfo:
    iterations: int
    residual: float  # relative 2-norm residual
    converged: bool


def pcg(A, b, tol=1e-12, x0=None, maxiter=None, btol=0.0):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``||b - A x|| <= tol * ||b||``.  With ``btol > 0`` it also
    stops once ``||b - A x|| <= btol * max(|b|_inf, | |A| |x| |_inf)``, a
    backward-error test that stays reachable when ``||b||`` is tiny next to
    the terms it balances.  Returns ``(x, CGInfo)``.
    """
    b = np.asarray(b, float)
    n = len(b)
    if maxiter is None:
        maxiter = 20 * max(n, 1)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), CGInfo(0, 0.0, True)
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise NoConvergence("operator has a non-positive diagonal entry")
    minv = 1.0 / diag
    absA = abs(A) if btol > 0 else None
    bmax = float(np.abs(b).max())

    def target(x):
        if absA is None:
            return tol * bnorm
        return max(tol * bnorm, btol * max(bmax, float((absA @ np.abs(x)).max())))

    x = np.zeros(n) if x0 is None else np.array(x0, float)
    r = b - A @ x
    rnorm = np.linalg.norm(r)
    if rnorm <= target(x):
        return x, CGInfo(0, rnorm / bnorm, True)
    z = minv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        q = A @ p
        pq = p @ q
        if pq <= 0:
            raise NoConvergence("operator is not positive definite (p'Ap <= 0)")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rnorm = np.linalg.norm(r)
        if rnorm <= target(x):
            # confirm with the true residual; the recursive one drifts
            rtrue = np.linalg.norm(b - A @ x)
            if rtrue <= target(x):
                return x, CGInfo(it, rtrue / bnorm, True)
            r = b - A @ x
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(f"CG did not reach tol={tol:g} in {maxiter} iterations (residual {rnorm / bnorm:.3e})")


def solve_spd(A, b, tol=1e-12) -> np.ndarray:
    """Solve an SPD system by Jacobi-PCG; raises NoConvergence at the iteration cap."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    return pcg(A, b, tol)[0]


@dataclass
class SolverOptions:
    c: float = 1.0
    max_outer: int = 100
    tol: float = 1e-12


@dataclass
class DiscreteSolution:
    y: np.ndarray
    multiplier: np.ndarray  # at partition.signorini, same order
    active: np.ndarray  # node indices
    iterations: int
    trace: list = field(default_factory=list)
    signorini: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    psi: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def multiplier_full(self) -> np.ndarray:
        lam = np.zeros(len(self.y))
        lam[self.signorini] = self.multiplier
        return lam

    def trace_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "active": [int(i) for i in self.active],
            "steps": self.trace,
        }


def energy(A, b, y) -> float:
    return float(0.5 * y @ (A @ y) - b @ y)


def solve_signorini(A, b, part: DofPartition, psi=None, opts: SolverOptions | None = None) -> DiscreteSolution:
    """Primal-dual active set iteration on the full (unreduced) system ``A y = b``.

    Active nodes get ``y = psi``; the multiplier ``lambda = (A y - b)`` on the
    Signorini nodes approximates the boundary flux and must be >= 0.

    Inner CG solves use the backward-error test of ``pcg`` with ``btol = tol``
    on top of the relative one.  That scale matches the KKT check; the
    relative target alone can sit below the roundoff floor when the reduced
    right-hand side is small.
    """
    opts = opts or SolverOptions()
    if not opts.c > 0:
        raise ValueError("active-set weight c must be positive")
    A = sp.csr_matrix(A)
    b = np.asarray(b, float)
    n = part.n
    sig = np.asarray(part.signorini, dtype=np.int64)
    psi = np.zeros(len(sig)) if psi is None else np.asarray(psi, float)
    if psi.shape != sig.shape or not np.all(np.isfinite(psi)):
        raise ValueError("gap values must be finite, one per Signorini node")
    y = part.lifting_vector()
    if len(part.dirichlet) == n:
        return DiscreteSolution(y, np.zeros(0), np.zeros(0, np.int64), 0, [], sig, psi)
    diag = A.diagonal()[sig]
    unknown = part.unknowns
    is_sig = np.zeros(n, bool)
    is_sig[sig] = True
    active_mask = np.zeros(len(sig), bool)
    history = [frozenset()]
    trace = []
    x_prev = None
    for it in range(1, opts.max_outer + 1):
        fixed_sig = sig[active_mask]
        y_it = part.lifting_vector()
        y_it[fixed_sig] = psi[active_mask]
        inner = np.setdiff1d(unknown, fixed_sig)
        if len(inner):
            rhs = b[inner] - (A[inner] @ y_it)
            A_ii = A[inner][:, inner]
            x0 = None if x_prev is None else x_prev[inner]
            x, info = pcg(A_ii, rhs, opts.tol, x0=x0, btol=opts.tol)
            y_it[inner] = x
        else:
            info = None
        lam = (A[sig] @ y_it) - b[sig]
        lam[~active_mask] = 0.0
        new_mask = (y_it[sig] - psi - opts.c * lam / diag) < 0
        gap = y_it[sig] - psi
        primal = float(max(0.0, -gap.min())) if len(sig) else 0.0
        step = {
            "iteration": it,
            "active_size": int(active_mask.sum()),
            "cg_iterations": 0 if info is None else info.iterations,
            "cg_residual": 0.0 if info is None else float(info.residual),
            "energy": energy(A, b, y_it),
            "primal_violation": primal,
            "feasible": bool(primal == 0.0),
        }
        trace.append(step)
        log.debug("pdas it=%d active=%d cg=%d", it, step["active_size"], step["cg_iterations"])
        x_prev = y_it
        if np.array_equal(new_mask, active_mask):
            return DiscreteSolution(y_it, lam, sig[active_mask], it, trace, sig, psi)
        key = frozenset(sig[new_mask].tolist())
        if key in history:
            raise CycleDetected(
                f"active set revisits an earlier set after {it} iterations",
                (sorted(history[-1]), sorted(key)),
            )
        history.append(key)
        active_mask = new_mask
    raise CycleDetected(
        f"active set did not settle within {opts.max_outer} iterations",
        (sorted(history[-2]) if len(history) > 1 else [], sorted(history[-1])),
    )


@dataclass
class KKTResiduals:
    primal: float
    dual: float
    comp: float
    primal_scaled: float
    dual_scaled: float
    comp_scaled: float

    def max_scaled(self) -> float:
        return max(self.primal_scaled, self.dual_scaled, self.comp_scaled)


def kkt_residuals(y, A, b, part: DofPartition, psi=None) -> KKTResiduals:
    """Recompute primal, dual and complementarity violations from ``y`` alone."""
    A = sp.csr_matrix(A)
    y = np.asarray(y, float)
    b = np.asarray(b, float)
    sig = part.signorini
    psi = np.zeros(len(sig)) if psi is None else np.asarray(psi, float)
    if len(sig) == 0:
        return KKTResiduals(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    lam = A[sig] @ y - b[sig]
    gap = y[sig] - psi
    primal = float(max(0.0, -gap.min()))
    dual = float(max(0.0, -lam.min()))
    comp = float(np.abs(gap * lam).max())
    sy = max(float(np.abs(y).max()), float(np.abs(psi).max())) or 1.0
    sl = max(float((abs(A) @ np.abs(y)).max()), float(np.abs(b).max())) or 1.0
    return KKTResiduals(primal, dual, comp, primal / sy, dual / sl, comp / (sy * sl))


def brute_force_kkt(A, b, part: DofPartition, psi=None):
    """Exhaustive active-set oracle with dense solves; for tiny problems only.

    Returns ``(y, lam)`` of the unique active subset whose equality solution
    has ``y >= psi`` and ``lam >= 0``.
    """
    A = sp.csr_matrix(A).toarray()
    b = np.asarray(b, float)
    sig = np.asarray(part.signorini)
    k = len(sig)
    if k > 16:
        raise ValueError("brute force oracle limited to 16 Signorini nodes")
    psi = np.zeros(k) if psi is None else np.asarray(psi, float)
    unknown = part.unknowns
    best = None
    for bits in range(2**k):
        mask = np.array([(bits >> i) & 1 for i in range(k)], bool)
        y = part.lifting_vector()
        y[sig[mask]] = psi[mask]
        inner = np.setdiff1d(unknown, sig[mask])
        if len(inner):
            y[inner] = np.linalg.solve(A[np.ix_(inner, inner)], b[inner] - A[inner] @ y)
        lam = A[sig] @ y - b[sig]
        lam[~mask] = 0.0
        scale = max(1.0, np.abs(y).max())
        if np.all(y[sig] - psi >= -1e-12 * scale) and np.all(lam >= -1e-12 * scale * np.abs(A).max()):
            if best is not None:
                # degenerate ties give the same y; keep the first
                continue
            best = (y, lam)
    if best is None:
        raise SolverError("no KKT point found by enumeration")
    return best
