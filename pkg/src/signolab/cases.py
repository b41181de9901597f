"""Benchmark problems with known coincidence structure and singular exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.stats import qmc

from signolab.fields import (
    ConstantField,
    Field,
    PolarPowerField,
    PolynomialField,
    ZeroField,
    make_field,
    negative_laplacian,
    polynomial_product,
)
from signolab.geometry import BoundarySpec, ConditionTag, Polygon, Segment, validate_boundary


class IncompatibleYStar(ValueError):
    pass


class StrongFormViolation(AssertionError):
    pass


@dataclass(frozen=True)
class CaseSpec:
    name: str
    spec: BoundarySpec
    exact: Field | None = None
    expected_intervals: int | None = None
    expected_exponents: tuple = ()  # ((x, y), lambda) pairs
    y_star: Field | None = None
    notes: str = ""
    extra: dict = field(default_factory=dict)


UNIT_SQUARE = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
L_DOMAIN = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (0.0, -1.0)))
# (0, 0) is kept as a collinear vertex so the contact endpoint is a mesh node
ENDPOINT_RECT = Polygon(((-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0)))


def _with_exact(spec: BoundarySpec, exact: Field) -> BoundarySpec:
    return BoundarySpec(
        spec.polygon, spec.segments, lifting=exact, load=spec.load, gap=spec.gap, exact=exact, name=spec.name
    )


def endpoint_case() -> CaseSpec:
    """Re(z^{3/2}) on [-1,1]x[0,1]: contact exactly on {x <= 0, y = 0}."""
    exact = PolarPowerField(params={"exponent": 1.5, "cut": -math.pi / 2})
    spec = BoundarySpec(
        ENDPOINT_RECT,
        (Segment((0, 1), "S"), Segment((2, 3, 4), "D")),
        lifting=exact,
        exact=exact,
        name="endpoint",
    )
    return CaseSpec("endpoint", validate_boundary(spec), exact, 1, (((0.0, 0.0), 1.5),))


def l_domain_sd_case() -> CaseSpec:
    """rho^{1/3} cos(theta/3): Signorini on theta = 0 (no contact), Dirichlet elsewhere."""
    exact = PolarPowerField(params={"exponent": 1.0 / 3.0, "cut": -math.pi / 4})
    spec = BoundarySpec(
        L_DOMAIN,
        (Segment((0,), "S"), Segment((1, 2, 3, 4, 5), "D")),
        lifting=exact,
        exact=exact,
        name="l_domain_sd",
    )
    return CaseSpec("l_domain_sd", validate_boundary(spec), exact, 0, (((0.0, 0.0), 1.0 / 3.0),))


def l_domain_ss_case() -> CaseSpec:
    """-rho^{2/3} cos(2(theta - 3pi/4)/3): full contact on both reentrant legs."""
    exact = PolarPowerField(
        params={"exponent": 2.0 / 3.0, "phase": 0.75 * math.pi, "scale": -1.0, "cut": -math.pi / 4}
    )
    spec = BoundarySpec(
        L_DOMAIN,
        (Segment((5, 0), "S"), Segment((1, 2, 3, 4), "D")),
        lifting=exact,
        exact=exact,
        name="l_domain_ss",
    )
    return CaseSpec("l_domain_ss", validate_boundary(spec), exact, 1, (((0.0, 0.0), 2.0 / 3.0),))


def bubble_field(scale: float = 256.0) -> PolynomialField:
    """``scale * x^2 (1-x)^2 y^2 (1-y)^2 (1 + x)`` with flat traces on the unit square."""
    px = np.polynomial.polynomial.polymul([0, 0, 1, -2, 1], [1, 1])  # x^2(1-x)^2(1+x)
    py = np.array([0, 0, 1, -2, 1], float)  # y^2(1-y)^2
    coeffs = scale * polynomial_product(px[:, None], py[None, :])
    return PolynomialField(params={"coeffs": coeffs.tolist()})


def _homogenized_base(u_top) -> BoundarySpec:
    return BoundarySpec(
        UNIT_SQUARE,
        (
            Segment((0,), "S"),
            Segment((1,), "D"),
            Segment((2,), "U", tuple(u_top)),
            Segment((3,), "D"),
        ),
        name="homogenized",
    )


def homogenized_case(y_star: Field | None = None, u_top=(-1.0,)) -> CaseSpec:
    """Inhomogeneous problem ``f = -Lap y*``, ``psi = y*|_S`` built from ``y*``.

    ``y*`` must vanish on the Dirichlet part and have zero normal derivative
    on the rest of the boundary; the shifted solution ``y - y*`` then solves
    the homogeneous problem with the same control datum.
    """
    y_star = bubble_field() if y_star is None else make_field(y_star)
    base = _homogenized_base(u_top)
    _check_y_star(base, y_star)
    f = negative_laplacian(y_star)
    spec = BoundarySpec(
        base.polygon,
        base.segments,
        lifting=y_star,
        load=None if isinstance(f, ZeroField) else f,
        gap=y_star,
        name="homogenized",
    )
    return CaseSpec("homogenized", validate_boundary(spec), None, None, (), y_star=y_star)


def square_full_signorini_case(load: float = 1.0) -> CaseSpec:
    """Unit square, Signorini on three sides, Dirichlet on the left side."""
    spec = BoundarySpec(
        UNIT_SQUARE,
        (Segment((0, 1, 2), "S"), Segment((3,), "D")),
        load=None if load == 0 else ConstantField(params={"value": load}),
        name="square_full_signorini",
    )
    return CaseSpec("square_full_signorini", validate_boundary(spec), extra={"load": load})


def zero_case() -> CaseSpec:
    spec = BoundarySpec(
        UNIT_SQUARE,
        (Segment((0,), "S"), Segment((1,), "D"), Segment((2,), "N"), Segment((3,), "D")),
        name="zero",
    )
    return CaseSpec("zero", validate_boundary(spec), ZeroField(), None)


def linear_case() -> CaseSpec:
    """y = 1 + x: Signorini bottom without contact; exercises exponent 1 fits."""
    exact = PolynomialField(params={"coeffs": [[1.0], [1.0]]})
    spec = BoundarySpec(
        UNIT_SQUARE,
        (Segment((0,), "S"), Segment((1,), "D"), Segment((2,), "N"), Segment((3,), "D")),
        lifting=exact,
        exact=exact,
        name="linear",
    )
    return CaseSpec("linear", validate_boundary(spec), exact, 0)


CASES = {
    "endpoint": endpoint_case,
    "l_domain_sd": l_domain_sd_case,
    "l_domain_ss": l_domain_ss_case,
    "homogenized": homogenized_case,
    "square_full_signorini": square_full_signorini_case,
    "zero": zero_case,
    "linear": linear_case,
}


def get_case(name: str) -> CaseSpec:
    try:
        return CASES[name]()
    except KeyError:
        raise KeyError(f"unknown case {name!r}; known: {sorted(CASES)}") from None


# ------------------------------------------------------------ strong-form probes


def interior_probes(polygon: Polygon, count: int = 1000) -> np.ndarray:
    """Deterministic Halton points inside the polygon."""
    v = polygon.array()
    lo, hi = v.min(axis=0), v.max(axis=0)
    sampler = qmc.Halton(d=2, scramble=False)
    out = []
    while sum(len(o) for o in out) < count:
        p = lo + sampler.random(4 * count) * (hi - lo)
        p = p[polygon.contains(p[:, 0], p[:, 1])]
        out.append(p)
    return np.concatenate(out)[:count]


def boundary_probes(spec: BoundarySpec, per_edge: int = 50):
    """Points strictly inside each polygon edge with outward normals."""
    out = []
    for k in range(spec.polygon.n):
        a, b = (np.array(p) for p in spec.polygon.edge(k))
        t = (np.arange(per_edge) + 0.5) / per_edge
        pts = a + t[:, None] * (b - a)
        d = (b - a) / np.linalg.norm(b - a)
        normal = np.array([d[1], -d[0]])
        out.append((k, pts, normal))
    return out


def mp_laplacian(f: Field, points, dps: int = 50, rel_step: float = 1e-12) -> np.ndarray:
    """5-point Laplacian evaluated in extended precision with a tiny fixed step."""
    out = np.empty(len(points))
    with mpmath.workdps(dps):
        for k, (x, y) in enumerate(points):
            x, y = mpmath.mpf(float(x)), mpmath.mpf(float(y))
            h = mpmath.mpf(rel_step)
            c = f.mp_value(x, y)
            lap = (f.mp_value(x + h, y) + f.mp_value(x - h, y) + f.mp_value(x, y + h) + f.mp_value(x, y - h) - 4 * c) / h**2
            out[k] = float(lap)
    return out


def strong_form_report(spec: BoundarySpec, exact: Field, n_interior: int = 1000, per_edge: int = 50) -> dict:
    """Max violations of the strong form (1)-(5) at deterministic probe points."""
    pts = interior_probes(spec.polygon, n_interior)
    lap = mp_laplacian(exact, pts)
    f = spec.load.value(pts[:, 0], pts[:, 1]) if spec.load is not None else 0.0
    res = {"laplace": float(np.max(np.abs(lap + f))), "D": 0.0, "N": 0.0, "U": 0.0, "S": 0.0}
    for k, p, normal in boundary_probes(spec, per_edge):
        s = spec.edge_segment(k)
        tag = spec.segments[s].tag
        y = exact.value(p[:, 0], p[:, 1])
        gx, gy = exact.grad(p[:, 0], p[:, 1])
        dn = gx * normal[0] + gy * normal[1]
        data = spec.segment_data(s, k, p)
        if tag == ConditionTag.DIRICHLET:
            v = np.abs(y - data)
        elif tag in (ConditionTag.NEUMANN, ConditionTag.CONTROL):
            v = np.abs(dn - data)
        else:
            g = y - data
            v = np.maximum.reduce([np.maximum(-g, 0), np.maximum(-dn, 0), np.abs(g * dn)])
        res[tag.value] = max(res[tag.value], float(v.max()))
    return res


def check_strong_form(case: CaseSpec, lap_tol: float = 1e-8, bc_tol: float = 1e-10) -> dict:
    if case.exact is None:
        raise ValueError(f"case {case.name!r} has no exact solution")
    rep = strong_form_report(case.spec, case.exact)
    if rep["laplace"] > lap_tol:
        raise StrongFormViolation(f"{case.name}: |Lap y + f| = {rep['laplace']:.3e}")
    for t in "DNUS":
        if rep[t] > bc_tol:
            raise StrongFormViolation(f"{case.name}: boundary condition {t} violated by {rep[t]:.3e}")
    return rep


def _check_y_star(spec: BoundarySpec, y_star: Field, tol: float = 1e-10) -> None:
    for k, p, normal in boundary_probes(spec):
        tag = spec.edge_tag(k)
        y = y_star.value(p[:, 0], p[:, 1])
        gx, gy = y_star.grad(p[:, 0], p[:, 1])
        dn = gx * normal[0] + gy * normal[1]
        if tag == ConditionTag.DIRICHLET and np.max(np.abs(y)) > tol:
            raise IncompatibleYStar(f"y* has nonzero trace on Dirichlet edge {k}")
        if tag != ConditionTag.DIRICHLET and np.max(np.abs(dn)) > tol:
            raise IncompatibleYStar(f"y* has nonzero normal derivative on edge {k} ({tag.value})")


def shift_system(A, b, y_star_nodal, part, psi):
    """Discrete homogenization: unknown ``z = y - I_h y*``.

    Returns ``(b_shift, lifting_shift, psi_shift)`` for the same operator.
    """
    ys = np.asarray(y_star_nodal, float)
    b_shift = np.asarray(b, float) - A @ ys
    lift = part.lifting - ys[part.dirichlet]
    psi_shift = np.asarray(psi, float) - ys[part.signorini]
    return b_shift, lift, psi_shift
