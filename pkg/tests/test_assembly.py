import numpy as np
import pytest
import scipy.sparse.linalg as spla
import sympy

from signolab import assembly
from signolab.fields import ConstantField, PolynomialField
from signolab.geometry import BoundarySpec, Polygon, Segment
from signolab.mesh import TriMesh, refine_red, triangulate

UNIT_TRI = Polygon(((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)))


def single_triangle(spec):
    return TriMesh(
        UNIT_TRI.array(),
        [[0, 1, 2]],
        [[0, 1], [1, 2], [2, 0]],
        [spec.edge_segment(k) for k in range(3)],
        [0, 1, 2],
        [spec.edge_tag(k).value for k in range(3)],
        [0, 1, 2],
    )


def test_reference_element_matrix():
    spec = BoundarySpec(UNIT_TRI, (Segment((0, 1, 2), "D"),))
    A = assembly.stiffness(single_triangle(spec)).toarray()
    expected = np.array([[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]])
    assert np.allclose(A, expected, atol=1e-15)


def test_rows_sum_to_zero_and_symmetric(square_spec):
    m = triangulate(square_spec, 0.15)
    A = assembly.stiffness(m)
    assert np.abs(A @ np.ones(m.n_nodes)).max() <= 1e-12 * np.abs(A).max()
    assert abs(A - A.T).max() == 0.0


def test_energy_of_x1(square_spec):
    m = refine_red(triangulate(square_spec, 0.3))
    A = assembly.stiffness(m)
    y = m.nodes[:, 0]
    assert y @ (A @ y) == pytest.approx(1.0, abs=1e-10)


def test_control_load_constant_and_linear():
    L = 2.0
    poly = Polygon(((0.0, 0.0), (L, 0.0), (0.0, 1.0)))
    for data, expected in (((1.0,), (L / 2, L / 2)), ((0.0, 1.0), (L / 6, L / 3)), ((0.0,), (0.0, 0.0))):
        spec = BoundarySpec(poly, (Segment((0,), "U", data), Segment((1, 2), "D")))
        m = TriMesh(poly.array(), [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], [0, 1, 1], [0, 1, 2], ["U", "D", "D"], [0, 1, 2])
        b = assembly.load_control(m, spec)
        assert b[:2] == pytest.approx(expected, abs=1e-14)
        assert b[2] == 0.0


def test_volume_load_constant():
    spec = BoundarySpec(UNIT_TRI, (Segment((0, 1, 2), "D"),))
    m = single_triangle(spec)
    assert np.allclose(assembly.load_volume(m, ConstantField(params={"value": 1.0})), 1 / 6, atol=1e-15)
    assert not assembly.load_volume(m, None).any()


def test_volume_load_quadratic_exact():
    x, y = sympy.symbols("x y")
    f = 3 * x**2 - 2 * x * y + y**2 + x - 1
    phis = [1 - x - y, x, y]
    exact = [float(sympy.integrate(sympy.integrate(f * p, (y, 0, 1 - x)), (x, 0, 1))) for p in phis]
    coeffs = [[-1.0, 0.0, 1.0], [1.0, -2.0, 0.0], [3.0, 0.0, 0.0]]
    spec = BoundarySpec(UNIT_TRI, (Segment((0, 1, 2), "D"),))
    b = assembly.load_volume(single_triangle(spec), PolynomialField(params={"coeffs": coeffs}))
    assert np.allclose(b, exact, atol=1e-12)


def test_partition_junctions():
    sq = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    spec = BoundarySpec(sq, (Segment((0,), "S"), Segment((1,), "N"), Segment((2,), "D"), Segment((3,), "N")))
    m = triangulate(spec, 0.5)
    part = assembly.partition(m, spec)
    # S/N corners are Signorini, D/N corners Dirichlet
    assert m.node_index((0.0, 0.0)) in part.signorini
    assert m.node_index((1.0, 0.0)) in part.signorini
    assert m.node_index((1.0, 1.0)) in part.dirichlet
    all_nodes = np.concatenate([part.dirichlet, part.signorini, part.free])
    assert np.array_equal(np.sort(all_nodes), np.arange(m.n_nodes))


def test_dirichlet_junction_goes_to_dirichlet(square_spec):
    m = triangulate(square_spec, 0.5)
    part = assembly.partition(m, square_spec)
    assert m.node_index((1.0, 0.0)) in part.dirichlet


def test_reduce_dirichlet_zero_lifting(square_spec):
    m = triangulate(square_spec, 0.25)
    A = assembly.stiffness(m)
    b = np.arange(m.n_nodes, dtype=float)
    part = assembly.partition(m, square_spec)
    _, b_red, _ = assembly.reduce_dirichlet(A, b, part)
    assert np.array_equal(b_red, b[part.unknowns])


def test_reduce_dirichlet_single_unknown():
    # one free node in the middle of a square split into four triangles
    nodes = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    tris = [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]
    sq = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    spec = BoundarySpec(sq, (Segment((0, 1, 2, 3), "D", (1.0,)),))
    m = TriMesh(nodes, tris, [[0, 1], [1, 2], [2, 3], [3, 0]], [0] * 4, [0, 1, 2, 3], ["D"] * 4, [0, 1, 2, 3])
    A = assembly.stiffness(m)
    part = assembly.partition(m, spec)
    A_red, b_red, g = assembly.reduce_dirichlet(A, np.zeros(5), part)
    # centre row: diagonal 4, each corner -1  ->  4 y = 4
    assert A_red.toarray().ravel() == pytest.approx([4.0])
    assert b_red == pytest.approx([4.0])


def test_reduce_dirichlet_linear_consistency():
    exact = PolynomialField(params={"coeffs": [[0.5, -1.0], [2.0, 0.0]]})
    sq = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    spec = BoundarySpec(sq, (Segment((0, 1, 2, 3), "D"),), lifting=exact)
    m = triangulate(spec, 0.2)
    A = assembly.stiffness(m)
    part = assembly.partition(m, spec)
    A_red, b_red, g = assembly.reduce_dirichlet(A, assembly.load_vector(m, spec), part)
    y = exact.value(m.nodes[:, 0], m.nodes[:, 1])
    assert np.abs(A_red @ y[part.unknowns] - b_red).max() <= 1e-12
    x = spla.spsolve(A_red.tocsc(), b_red)
    assert np.allclose(x, y[part.unknowns], atol=1e-12)


def test_dump_coo_sorted():
    spec = BoundarySpec(UNIT_TRI, (Segment((0, 1, 2), "D"),))
    text = assembly.dump_coo(assembly.stiffness(single_triangle(spec)))
    rows = [tuple(map(int, line.split()[:2])) for line in text.splitlines()]
    assert rows == sorted(rows)
    assert text.splitlines()[0] == "0 0 1.0"
