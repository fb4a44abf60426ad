import math

import numpy as np
import pytest

from kmsphase.errors import DimensionCap, EigenSnapAmbiguity
from kmsphase.model import GraphSpec, compute_cnp_ideals, validate, zero_lattice
from kmsphase.simplex import (
    _affine_vertices,
    _snap_eigenvalue,
    avt_traces,
    certificate,
    f_trace_set,
    finite_trace_set,
    full_simplex,
    is_member,
    phase_diagram,
)
from oracles import brute_polytope_vertices

LOG2, LOG3 = math.log(2), math.log(3)


# -- f_trace_set --------------------------------------------------------------


def test_e1_part1_at_log3(e1):
    res = f_trace_set(e1, LOG3, {1})
    assert not res.empty
    assert len(res.extreme_points) == 1
    assert res.extreme_points[0] == pytest.approx([1.0])
    assert res.affine_dim == 0


def test_e1_part2_at_log2_diverges(e1):
    res = f_trace_set(e1, LOG2, {2})
    assert res.empty  # the summability certificate fails (rho = 3 > 2)


def test_e4_part1_at_log3(e4):
    res = f_trace_set(e4, LOG3, {1})
    assert [round(x, 12) for x in res.extreme_points[0]] == [1.0, 0.0]


def test_residuals_within_tolerance(e4):
    res = f_trace_set(e4, LOG3, {1})
    tau = res.extreme_points[0]
    resid = np.max(np.abs(e4.adjacency[1].astype(float) @ tau - math.exp(LOG3) * tau))
    assert resid <= 1e-9


# -- finite_trace_set ----------------------------------------------------------


def test_e1_fty_above_and_at_threshold(e1):
    assert not finite_trace_set(e1, LOG3 + 0.1).empty
    assert finite_trace_set(e1, LOG3).empty  # critical direction diverges


def test_diag23_fty_face():
    inst = validate(GraphSpec.make(1, ["u", "v"], [[[2, 0], [0, 3]]]))
    res = finite_trace_set(inst, LOG3)
    assert len(res.extreme_points) == 1
    assert res.extreme_points[0] == pytest.approx([1.0, 0.0])


def test_fty_is_single_face(e2pf):
    res = finite_trace_set(e2pf, LOG2 + 0.5)
    assert res.affine_dim == 1
    assert res.diagnostics["convex"]


# -- avt_traces -----------------------------------------------------------------


def test_avt_pf_point(e2pf):
    res = avt_traces(e2pf, LOG2)
    assert len(res.extreme_points) == 1
    assert res.extreme_points[0] == pytest.approx([0.5, 0.5], abs=1e-9)


def test_avt_incompatible_scalars(e1):
    for beta in (LOG2, LOG3, 1.0):
        assert avt_traces(e1, beta).empty


def test_avt_e4_empty(e4):
    assert avt_traces(e4, LOG3).empty


# -- full simplex -----------------------------------------------------------------


def test_full_simplex_e4_coexistence(e4):
    results = full_simplex(e4, LOG3)
    nonempty = {F for F, r in results.items() if not r.empty}
    assert nonempty == {frozenset({1}), frozenset({2})}
    assert results[frozenset({1})].extreme_points[0] == pytest.approx([1.0, 0.0])
    assert results[frozenset({2})].extreme_points[0] == pytest.approx([0.0, 1.0])


def test_full_simplex_e1_gap(e1):
    for beta in (0.8, 0.95, 1.05):
        results = full_simplex(e1, beta)
        assert all(r.empty for r in results.values())


def test_full_simplex_above_strong_entropy(e1, e2pf, e4):
    for inst, hs in ((e1, LOG3), (e2pf, LOG2), (e4, LOG3)):
        results = full_simplex(inst, hs + 0.25)
        for F, r in results.items():
            if F == frozenset(range(1, inst.N + 1)):
                assert not r.empty
                assert len(r.extreme_points) == inst.dim_A
            else:
                assert r.empty


# -- membership / certificates ---------------------------------------------------


def test_is_member_consistency(e4):
    results = full_simplex(e4, LOG3)
    for F, r in results.items():
        for tau in r.extreme_points:
            assert is_member(e4, tau, LOG3, F)
            for Fp in results:
                if Fp != F:
                    assert not is_member(e4, tau, LOG3, Fp)


def test_certificate_union_closed(e4):
    ok_u, _, _ = certificate(e4, [0], {1}, 3.0 + 0.5)
    ok_v, _, _ = certificate(e4, [1], {1}, 3.0 + 0.5)
    ok_uv, _, _ = certificate(e4, [0, 1], {1}, 3.0 + 0.5)
    assert ok_u and ok_v and ok_uv


# -- vertex enumeration -----------------------------------------------------------


def test_affine_vertices_against_brute():
    rng = np.random.default_rng(7)
    for _ in range(25):
        dim = rng.integers(2, 6)
        kdim = rng.integers(1, dim + 1)
        kernel, _ = np.linalg.qr(rng.normal(size=(dim, kdim)))
        got = _affine_vertices(kernel, dim)
        # oracle: vertices of {x >= 0, proj x = x, 1x = 1} via equality rows
        proj = np.eye(dim) - kernel @ kernel.T
        rows = np.vstack([proj, np.ones((1, dim))])
        rhs = np.concatenate([np.zeros(dim), [1.0]])
        want = brute_polytope_vertices(rows, rhs, dim)
        assert len(got) == len(want)
        for v in got:
            assert any(np.max(np.abs(v - w)) < 1e-6 for w in want)


def test_dimension_cap():
    nv = 33
    B = [[0] * nv for _ in range(nv)]
    for v in range(nv):
        B[v][v] = 1
    inst = validate(GraphSpec.make(1, ["v%d" % i for i in range(nv)], [B]))
    with pytest.raises(DimensionCap):
        f_trace_set(inst, 1.0, frozenset())


def test_eigen_snap_ambiguity():
    M = np.diag([2.0, 2.0 + 3e-10])
    with pytest.raises(EigenSnapAmbiguity):
        _snap_eigenvalue(M, 2.0 + 1.5e-10, 1e-9)


def test_eigen_snap_none_is_empty(e1):
    res = f_trace_set(e1, 1.0, {1})  # e^1 is no eigenvalue of B_2
    assert res.empty
    assert res.diagnostics["matched_eigenvalues"]["2"] is None


# -- ideal filters -----------------------------------------------------------------


def test_cnp_lattice_shrinks_fty(source_instance):
    beta = LOG2
    lattice = compute_cnp_ideals(source_instance)
    free = finite_trace_set(source_instance, beta)
    filtered = finite_trace_set(source_instance, beta, lattice)
    assert free.affine_dim == 1
    assert filtered.affine_dim == 0
    assert filtered.extreme_points[0] == pytest.approx([1.0, 0.0])
    # the zero lattice reproduces the unfiltered simplex
    zero = finite_trace_set(source_instance, beta, zero_lattice(2))
    assert zero.affine_dim == free.affine_dim


# -- phase diagram -----------------------------------------------------------------


def test_phase_diagram_e1(e1):
    diagram = phase_diagram(e1, 0.5, 2.0, 25)
    assert LOG3 in diagram.betas and LOG2 in diagram.betas
    for beta, label in zip(diagram.betas, diagram.labels):
        if abs(beta - LOG3) < 1e-12:
            assert label == "{1}"
        elif beta < LOG3:
            assert label == "empty"
        else:
            assert label == "fty"


def test_phase_diagram_pf(e2pf):
    diagram = phase_diagram(e2pf, 0.1, 1.5, 20)
    for beta, label, row in zip(diagram.betas, diagram.labels, diagram.rows):
        if abs(beta - LOG2) < 1e-12:
            assert label == "{}"
        elif beta < LOG2:
            assert label == "empty"
        else:
            assert label == "fty"
            assert row[frozenset({1, 2})][1] == 1  # full 1-simplex


def test_phase_diagram_e4_coexistence(e4):
    diagram = phase_diagram(e4, 0.5, 1.5, 10)
    at_crit = [
        label
        for beta, label in zip(diagram.betas, diagram.labels)
        if abs(beta - LOG3) < 1e-12
    ]
    assert at_crit == ["coexistence:{1}+{2}"]


def test_phase_diagram_deterministic_across_jobs(e4):
    one = phase_diagram(e4, 0.5, 1.5, 10, jobs=1).to_json_dict()
    two = phase_diagram(e4, 0.5, 1.5, 10, jobs=3).to_json_dict()
    assert one == two
