import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signolab import analysis, cases
from signolab.analysis import (
    CoincidenceReport,
    InvalidIndex,
    SingularityNotExcited,
    WindowTooNarrow,
    component_stability,
    exceptional_p,
    extract_coincidence,
    fit_exponent,
    predicted_leading_exponent,
    singular_exponent_table,
)
from signolab.geometry import ConditionTag, CriticalPoint, critical_points
from signolab.mesh import GradingParams, TriMesh
from signolab.pipeline import mesh_hierarchy, solve_on
from signolab.vi_solver import DiscreteSolution

PI = math.pi
ORIGIN_CP = lambda case: [p for p in critical_points(case.spec) if p.location == (0.0, 0.0)][0]  # noqa: E731


def _cp(pair, alpha):
    return CriticalPoint((0.0, 0.0), alpha, tuple(ConditionTag(p) for p in pair), "corner")


# ------------------------------------------------------------------- table


def test_table_examples():
    assert singular_exponent_table(("S", "D"), 1.5 * PI, 1) == pytest.approx(1 / 3)
    assert singular_exponent_table(("S", "S"), 1.5 * PI, 2) == pytest.approx(2 / 3)
    assert singular_exponent_table(("D", "N"), 0.5 * PI, 1) == pytest.approx(1.0)
    assert singular_exponent_table(analysis.ENDPOINT, PI, 1) == 1.5


def test_table_rows_are_symmetric():
    for a, b in (("S", "D"), ("D", "N"), ("S", "N"), ("U", "N")):
        assert singular_exponent_table((a, b), 1.2, 3) == singular_exponent_table((b, a), 1.2, 3)


def test_table_index_checks():
    with pytest.raises(InvalidIndex):
        singular_exponent_table(("S", "S"), PI, 1)
    with pytest.raises(InvalidIndex):
        singular_exponent_table(analysis.ENDPOINT, PI, 2)
    with pytest.raises(InvalidIndex):
        singular_exponent_table(("D", "D"), PI, 0)
    with pytest.raises(ValueError):
        singular_exponent_table(("S", "U"), PI, 1)
    with pytest.raises(ValueError):
        singular_exponent_table(("D", "D"), 2 * PI, 1)


ROWS = [("D", "D"), ("N", "N"), ("U", "U"), ("U", "N"), ("D", "N"), ("D", "U"), ("S", "S"), ("S", "D"), ("S", "N")]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(ROWS), st.floats(0.1, 2 * PI - 0.1), st.floats(0.1, 2 * PI - 0.1), st.integers(2, 8))
def test_table_monotone(pair, a1, a2, j):
    lo, hi = sorted((a1, a2))
    assert singular_exponent_table(pair, lo, j) < singular_exponent_table(pair, lo, j + 1)
    if hi > lo:
        assert singular_exponent_table(pair, hi, j) < singular_exponent_table(pair, lo, j)


def test_predicted_leading():
    assert predicted_leading_exponent(_cp("SD", 1.5 * PI)) == (pytest.approx(1 / 3), 1)
    assert predicted_leading_exponent(_cp("SS", 1.5 * PI)) == (pytest.approx(2 / 3), 2)
    assert predicted_leading_exponent(_cp("DD", 0.5 * PI)) == (pytest.approx(2.0), 1)
    # D-N at a right angle gives exactly 1 for j = 1; the next entry is 3
    assert predicted_leading_exponent(_cp("DN", 0.5 * PI)) == (pytest.approx(3.0), 2)
    assert predicted_leading_exponent(analysis.endpoint_point((0.0, 0.0), 0.0)) == (1.5, 1)


def test_exceptional_p():
    assert exceptional_p([1.5 * PI] + [0.5 * PI] * 5) == [3.0, 6.0]
    assert exceptional_p([0.5 * PI]) == []
    assert exceptional_p([PI]) == [4.0]
    with pytest.raises(ValueError):
        exceptional_p([0.0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.05, 2 * PI - 0.05), min_size=1, max_size=6))
def test_exceptional_p_finite_and_above_two(angles):
    p = exceptional_p(angles)
    assert all(v > 2 for v in p)
    assert p == sorted(set(p))


# -------------------------------------------------------------- coincidence


@pytest.fixture(scope="module")
def endpoint_levels():
    case = cases.endpoint_case()
    return case, [solve_on(m, case.spec, h) for m, h in mesh_hierarchy(case.spec, 0.25, 4)]


def test_no_contact_gives_empty_report():
    case = cases.linear_case()
    (m, h), = mesh_hierarchy(case.spec, 0.25, 1)
    res = solve_on(m, case.spec, h)
    rep = extract_coincidence(res.sol, m, case.spec)
    assert rep.n_intervals == 0 and rep.n_isolated == 0 and rep.endpoints == []


def test_full_contact_is_one_interval():
    case = cases.zero_case()
    (m, h), = mesh_hierarchy(case.spec, 0.25, 1)
    res = solve_on(m, case.spec, h)
    rep = extract_coincidence(res.sol, m, case.spec)
    assert rep.n_intervals == 1
    assert rep.interval_points[0] == ((0.0, 0.0), (1.0, 0.0))
    assert rep.endpoints == []


def test_endpoint_case_interval(endpoint_levels):
    case, levels = endpoint_levels
    reports = [extract_coincidence(r.sol, r.mesh, case.spec, r.h) for r in levels]
    for rep in reports:
        assert rep.n_intervals == 1 and rep.n_isolated == 0
        assert rep.interval_points[0][0] == (-1.0, 0.0)
        (ex, ey), = rep.endpoints
        assert ey == 0.0 and abs(ex) <= rep.h
        # contact nodes are exactly those with x <= 0 away from the endpoint
    verdict = component_stability(reports)
    assert verdict.stable and verdict.n_intervals == 1


def test_endpoint_case_classification_matches_closed_form(endpoint_levels):
    case, levels = endpoint_levels
    r = levels[-1]
    sig = r.part.signorini
    x = r.mesh.nodes[sig, 0]
    active = np.isin(sig, r.sol.active)
    far = np.abs(x) > 2 * r.h
    assert np.array_equal(active[far], (x <= 0)[far])


def _permuted(mesh: TriMesh, sol: DiscreteSolution, seed=0):
    perm = np.random.default_rng(seed).permutation(mesh.n_nodes)  # new index of old node i
    inv = np.argsort(perm)
    m2 = TriMesh(
        mesh.nodes[inv],
        perm[mesh.triangles],
        perm[mesh.bedges],
        mesh.bseg,
        mesh.bpoly,
        mesh.btag,
        perm[mesh.vertex_nodes],
        level=mesh.level,
    )
    s2 = DiscreteSolution(
        sol.y[inv], sol.multiplier, perm[sol.active], sol.iterations, sol.trace, perm[sol.signorini], sol.psi
    )
    return m2, s2


def test_extraction_invariant_under_relabeling(endpoint_levels):
    case, levels = endpoint_levels
    r = levels[1]
    a = extract_coincidence(r.sol, r.mesh, case.spec, r.h)
    m2, s2 = _permuted(r.mesh, r.sol)
    b = extract_coincidence(s2, m2, case.spec, r.h)
    assert a.to_json() == b.to_json()


def test_synthetic_unstable_verdict():
    def rep(k, n):
        return CoincidenceReport(k, 0.1 / 2**k, [(0.0, 0.1)] * n, [], [], [(0.1 * i, 0.0) for i in range(2 * n)])

    verdict = component_stability([rep(0, 1), rep(1, 2), rep(2, 1), rep(3, 2)])
    assert not verdict.stable
    with pytest.raises(ValueError):
        component_stability([rep(0, 1), rep(1, 1)])
    moving = [CoincidenceReport(k, 0.01, [(0, 1)], [], [], [(0.5 * k, 0.0)]) for k in range(3)]
    assert not component_stability(moving).stable


# ---------------------------------------------------------- complementarity


def test_complementarity_zero_case():
    case = cases.zero_case()
    (m, h), = mesh_hierarchy(case.spec, 0.25, 1)
    res = solve_on(m, case.spec, h)
    assert analysis.complementarity_product(res.sol, m, critical_points(case.spec), 0.2).value == 0.0


def test_complementarity_full_contact_ss():
    case = cases.l_domain_ss_case()
    (m, h), = mesh_hierarchy(case.spec, 0.25, 1)
    res = solve_on(m, case.spec, h)
    c = analysis.complementarity_product(res.sol, m, critical_points(case.spec), 0.2)
    assert c.value <= 1e-12
    assert len(c.nodes) > 0


def test_complementarity_bound(endpoint_levels):
    case, levels = endpoint_levels
    for r in levels:
        c = analysis.complementarity_product(r.sol, r.mesh, critical_points(case.spec), 0.2)
        assert c.value <= c.bound() + 1e-15
    with pytest.raises(ValueError):
        analysis.complementarity_product(r.sol, r.mesh, [], 0.0)


# ------------------------------------------------------------------- fits


@pytest.mark.parametrize(
    "name,mu,expected",
    [("l_domain_sd", 1 / 3, 1 / 3), ("l_domain_ss", 2 / 3, 2 / 3), ("endpoint", 1.0, 1.5)],
)
def test_fit_synthetic_interpolants(name, mu, expected):
    case = cases.get_case(name)
    grading = [GradingParams((0.0, 0.0), mu, 1.0)] if mu < 1 else []
    m, _ = mesh_hierarchy(case.spec, 0.125, 3, grading)[-1]
    y = case.exact.value(m.nodes[:, 0], m.nodes[:, 1])
    cp = analysis.endpoint_point((0.0, 0.0), 0.0) if name == "endpoint" else ORIGIN_CP(case)
    rep = fit_exponent(y, m, cp, case.spec)
    assert abs(rep.exponent - expected) <= 0.05
    assert rep.predicted == pytest.approx(expected)
    if name == "l_domain_sd":
        assert 0.28 <= rep.exponent <= 0.38


def test_fit_linear_and_zero():
    case = cases.linear_case()
    m, _ = mesh_hierarchy(case.spec, 0.125, 3)[-1]
    cp = critical_points(case.spec)[0]
    y = case.exact.value(m.nodes[:, 0], m.nodes[:, 1])
    assert fit_exponent(y, m, cp, case.spec).exponent == pytest.approx(1.0, abs=0.02)
    with pytest.raises(SingularityNotExcited):
        fit_exponent(np.zeros(m.n_nodes), m, cp, case.spec)


def test_fit_window_checks():
    case = cases.linear_case()
    m, _ = mesh_hierarchy(case.spec, 0.125, 1)[-1]
    cp = critical_points(case.spec)[0]
    y = case.exact.value(m.nodes[:, 0], m.nodes[:, 1])
    with pytest.raises(WindowTooNarrow):
        fit_exponent(y, m, cp, case.spec)  # 4h = 0.5 already equals R/2
    with pytest.raises(ValueError):
        fit_exponent(y, m, cp, case.spec, window=(0.01, 0.4))


def test_endpoint_critical_points(endpoint_levels):
    case, levels = endpoint_levels
    r = levels[-1]
    rep = extract_coincidence(r.sol, r.mesh, case.spec, r.h)
    (cp,) = analysis.endpoint_critical_points(rep, r.mesh)
    assert cp.kind == analysis.ENDPOINT and cp.angle == PI
    assert cp.direction == pytest.approx(0.0)
