import math

import numpy as np
import pytest
import sympy

from signolab import assembly, cases
from signolab.analysis import predicted_leading_exponent
from signolab.assembly import DofPartition
from signolab.fields import PolynomialField, ZeroField
from signolab.geometry import critical_points
from signolab.mesh import triangulate
from signolab.pipeline import mesh_hierarchy, solve_on
from signolab.vi_solver import solve_signorini

EXACT = ["endpoint", "l_domain_sd", "l_domain_ss", "linear", "zero"]


@pytest.mark.parametrize("name", EXACT)
def test_strong_form(name):
    rep = cases.check_strong_form(cases.get_case(name))
    assert rep["laplace"] <= 1e-8


def test_unknown_case():
    with pytest.raises(KeyError):
        cases.get_case("nope")


def test_endpoint_traces():
    f = cases.endpoint_case().exact
    rho = 0.7
    # phi = 0: value rho^1.5, normal derivative (-d/dy) zero
    assert f.value(rho, 0.0) == pytest.approx(rho**1.5)
    assert f.grad(rho, 0.0)[1] == pytest.approx(0.0, abs=1e-15)
    # phi = pi: value 0, outward flux -d/dy = 1.5 rho^0.5 > 0
    assert f.value(-rho, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert -f.grad(-rho, 0.0)[1] == pytest.approx(1.5 * rho**0.5)


def test_l_domain_traces():
    sd, ss = cases.l_domain_sd_case().exact, cases.l_domain_ss_case().exact
    rho = 0.4
    assert sd.value(rho, 0.0) == pytest.approx(rho ** (1 / 3))
    assert sd.grad(rho, 0.0)[1] == pytest.approx(0.0, abs=1e-15)
    assert sd.value(0.0, -rho) == pytest.approx(0.0, abs=1e-15)
    assert ss.value(rho, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert -ss.grad(rho, 0.0)[1] == pytest.approx(2 / 3 * rho ** (-1 / 3))
    assert ss.value(0.0, -rho) == pytest.approx(0.0, abs=1e-15)
    # on the leg theta = 3pi/2 (x = 0, y < 0) the outward normal is +x
    assert ss.grad(0.0, -rho)[0] == pytest.approx(2 / 3 * rho ** (-1 / 3))


@pytest.mark.parametrize("name,expected", [("l_domain_sd", 1 / 3), ("l_domain_ss", 2 / 3)])
def test_predicted_exponent_matches_case(name, expected):
    case = cases.get_case(name)
    cp = [p for p in critical_points(case.spec) if p.location == (0.0, 0.0)][0]
    assert predicted_leading_exponent(cp)[0] == pytest.approx(expected)
    assert case.expected_exponents[0][1] == pytest.approx(expected)


def test_bubble_load_is_symbolic_laplacian():
    x, y = sympy.symbols("x y")
    bubble = 256 * x**2 * (1 - x) ** 2 * y**2 * (1 - y) ** 2 * (1 + x)
    f = sympy.lambdify((x, y), -(sympy.diff(bubble, x, 2) + sympy.diff(bubble, y, 2)))
    case = cases.homogenized_case()
    pts = np.random.default_rng(0).random((30, 2))
    assert np.allclose(case.spec.load.value(pts[:, 0], pts[:, 1]), f(pts[:, 0], pts[:, 1]), atol=1e-9)
    assert np.allclose(case.y_star.value(pts[:, 0], pts[:, 1]), sympy.lambdify((x, y), bubble)(pts[:, 0], pts[:, 1]))


def test_homogenized_zero_y_star():
    case = cases.homogenized_case(ZeroField())
    assert case.spec.load is None
    assert case.spec.gap.value(0.3, 0.0) == 0.0


def test_incompatible_y_star():
    with pytest.raises(cases.IncompatibleYStar):
        cases.homogenized_case(PolynomialField(params={"coeffs": [[1.0]]}))


def test_homogenization_identity():
    case = cases.homogenized_case()
    m, h = mesh_hierarchy(case.spec, 0.125, 2)[-1]
    direct = solve_on(m, case.spec, h)
    ys = case.y_star.value(m.nodes[:, 0], m.nodes[:, 1])
    b_s, lift_s, psi_s = cases.shift_system(direct.A, direct.b, ys, direct.part, direct.psi)
    p = direct.part
    shifted = solve_signorini(direct.A, b_s, DofPartition(p.dirichlet, p.signorini, p.free, lift_s, p.n), psi_s)
    assert np.abs(shifted.y + ys - direct.sol.y).max() <= 1e-9
    assert np.array_equal(np.sort(shifted.active), np.sort(direct.sol.active))


def test_dirichlet_nodes_exact_and_classification():
    case = cases.endpoint_case()
    m, h = mesh_hierarchy(case.spec, 0.125, 2)[-1]
    r = solve_on(m, case.spec, h)
    d = r.part.dirichlet
    assert np.array_equal(r.sol.y[d], case.exact.value(m.nodes[d, 0], m.nodes[d, 1]))


def test_square_full_signorini_zero_data():
    case = cases.square_full_signorini_case(load=0.0)
    m = triangulate(case.spec, 0.25)
    r = solve_on(m, case.spec)
    assert not r.sol.y.any()


def test_probes_are_deterministic_and_inside():
    a = cases.interior_probes(cases.L_DOMAIN, 200)
    b = cases.interior_probes(cases.L_DOMAIN, 200)
    assert np.array_equal(a, b) and len(a) == 200
    assert cases.L_DOMAIN.contains(a[:, 0], a[:, 1]).all()


def test_strong_form_violation_detected():
    bad = cases.CaseSpec("bad", cases.l_domain_sd_case().spec, PolynomialField(params={"coeffs": [[0, 0, 1], [0, 0, 0], [1, 0, 0]]}))
    with pytest.raises(cases.StrongFormViolation):
        cases.check_strong_form(bad)
