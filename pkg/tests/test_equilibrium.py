import math

import numpy as np
import pytest

from kmsphase.equilibrium import (
    MonomialQuery,
    build_state,
    evaluate_state,
    ground_states,
    partition_partial_sums,
    partition_value,
    raw_state,
    state_on_QF,
    wold_decompose,
)
from kmsphase.errors import ConvergenceError, MembershipError, NotKMSError, PathError
from kmsphase.model import GraphSpec, compute_cnp_ideals, validate
from kmsphase.paths import BasisPath, parse_path, path_algebra
from oracles import partition_partial

LOG2, LOG3 = math.log(2), math.log(3)


# -- partition values -----------------------------------------------------------


def test_partition_geometric(e1):
    pv = partition_value(e1, [1.0], LOG3, {1})
    assert pv.finite and pv.value == pytest.approx(3.0, abs=1e-9)


def test_partition_empty_set(e1, e4):
    assert partition_value(e1, [1.0], 1.23, frozenset()).value == 1.0
    assert partition_value(e4, [0.3, 0.7], 0.7, frozenset()).value == 1.0


def test_partition_divergent_full(e1):
    pv = partition_value(e1, [1.0], LOG3, {1, 2})
    assert not pv.finite and pv.value == math.inf


def test_partition_reachable_block():
    inst = validate(GraphSpec.make(1, ["u", "v"], [[[2, 0], [0, 3]]]))
    beta = LOG2 + 0.2
    pv = partition_value(inst, [1.0, 0.0], beta, {1})
    expect = 1.0 / (1.0 - 2.0 / math.exp(beta))
    assert pv.finite and pv.value == pytest.approx(expect, rel=1e-12)
    assert not partition_value(inst, [0.5, 0.5], beta, {1}).finite


def test_partition_vs_partial_sums(e1, e4):
    for inst, tau, F, beta in (
        (e1, [1.0], {1}, LOG3),
        (e4, [1.0, 0.0], {1}, LOG3),
        (e4, [0.25, 0.75], {1, 2}, LOG3 + 0.6),
    ):
        pv = partition_value(inst, tau, beta, F)
        brute = partition_partial(inst.adjacency, tau, math.exp(beta), F, 40)
        series = partition_partial_sums(inst, tau, beta, F, 40)
        assert series[-1] == pytest.approx(brute, rel=1e-9)
        assert series[-1] <= pv.value + 1e-9
        tail = pv.value - series[-1]
        assert 0 <= tail < 0.05 * pv.value


# -- state handles ----------------------------------------------------------------


def test_build_state_examples(e1, e4):
    h4 = build_state(e4, LOG3, [({1}, [1, 0], 0.5), ({2}, [0, 1], 0.5)])
    assert len(h4.components) == 2
    h1 = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    assert h1.components[0].c == pytest.approx(3.0)


def test_build_state_membership_error(e1):
    with pytest.raises(MembershipError):
        build_state(e1, LOG2, [({2}, [1.0], 1.0)])


def test_raw_state_convergence_error(e1):
    with pytest.raises(ConvergenceError):
        raw_state(e1, LOG2, [({2}, [1.0], 1.0)])


def test_evaluate_normalization(e1):
    h = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    assert evaluate_state(h, MonomialQuery.diag([1.0])) == pytest.approx(1.0)


def test_evaluate_generator_monomial(e1):
    h = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    alg = path_algebra(e1)
    p = alg.enumerate((1, 0))[0]
    assert evaluate_state(h, MonomialQuery.monomial(p, p)) == pytest.approx(1.0 / 3.0)


def test_evaluate_off_diagonal_zero(e1):
    h = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    alg = path_algebra(e1)
    p = alg.enumerate((1, 0))[0]
    q = alg.enumerate((0, 1))[0]
    assert evaluate_state(h, MonomialQuery.monomial(p, q)) == 0.0
    p1, p2 = alg.enumerate((1, 0))
    assert evaluate_state(h, MonomialQuery.monomial(p1, p2)) == 0.0


def test_evaluate_weighted_list(e1):
    h = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    alg = path_algebra(e1)
    p = alg.enumerate((1, 0))[0]
    val = evaluate_state(
        h, [(2.0, MonomialQuery.monomial(p, p)), (1.0, MonomialQuery.diag([1.0]))]
    )
    assert val == pytest.approx(2.0 / 3.0 + 1.0)


def test_evaluate_invalid_path(e4):
    h = build_state(e4, LOG3, [({1}, [1, 0], 1.0)])
    bad = BasisPath("graph", (1, 0), (((1, 99),), 0))
    with pytest.raises(PathError):
        evaluate_state(h, MonomialQuery.monomial(bad, bad))


def test_kms_scalar_identity(e1):
    # phi(t t^*) relates to the annihilated form through the Gibbs factor
    h = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    alg = path_algebra(e1)
    for deg in ((1, 0), (0, 1), (1, 1), (2, 1)):
        for p in alg.enumerate(deg):
            left = evaluate_state(h, MonomialQuery.monomial(p, p))
            src = np.zeros(1)
            src[0] = 1.0
            reduced = evaluate_state(h, MonomialQuery.diag(src))
            assert left == pytest.approx(math.exp(-LOG3 * p.length) * reduced)


def test_state_on_QF(e1, e4):
    h1 = build_state(e1, LOG3, [({1}, [1.0], 1.0)])
    assert state_on_QF(h1, {1}) == pytest.approx(1.0 / 3.0)
    h4 = build_state(e4, LOG3, [({1}, [1, 0], 0.5), ({2}, [0, 1], 0.5)])
    assert state_on_QF(h4, {1}) == pytest.approx(1.0 / 6.0)
    hf = build_state(e1, 2 * LOG3, [({1, 2}, [1.0], 1.0)])
    c = hf.components[0].c
    assert state_on_QF(hf, {1, 2}) == pytest.approx(1.0 / c)


# -- Wold decomposition -------------------------------------------------------------


def test_wold_diag23():
    inst = validate(GraphSpec.make(1, ["u", "v"], [[[2, 0], [0, 3]]]))
    w = wold_decompose(inst, LOG3, [0.3, 0.7])
    mass, tau = w.parts[frozenset({1})]
    assert mass == pytest.approx(0.3, abs=1e-9)
    assert tau == pytest.approx([1.0, 0.0], abs=1e-9)
    assert w.infinite_mass == pytest.approx(0.7, abs=1e-9)
    assert w.infinite_trace == pytest.approx([0.0, 1.0], abs=1e-9)


def test_wold_e4_mixture(e4):
    w = wold_decompose(e4, LOG3, [0.5, 0.5])
    m1, t1 = w.parts[frozenset({1})]
    m2, t2 = w.parts[frozenset({2})]
    assert m1 == pytest.approx(0.5, abs=1e-9)
    assert m2 == pytest.approx(0.5, abs=1e-9)
    assert t1 == pytest.approx([1, 0], abs=1e-9)
    assert t2 == pytest.approx([0, 1], abs=1e-9)
    assert w.parts[frozenset({1, 2})][0] == 0.0
    assert w.infinite_mass == pytest.approx(0.0, abs=1e-9)


def test_wold_pure_fty(e1):
    w = wold_decompose(e1, 2 * LOG3, [1.0])
    mass, tau = w.parts[frozenset({1, 2})]
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert tau == pytest.approx([1.0])
    assert w.infinite_mass == pytest.approx(0.0, abs=1e-9)


def test_wold_round_trip(e4):
    h = build_state(e4, LOG3, [({1}, [1, 0], 0.35), ({2}, [0, 1], 0.65)])
    w = wold_decompose(e4, LOG3, h.pi_trace())
    assert w.parts[frozenset({1})][0] == pytest.approx(0.35, abs=1e-9)
    assert w.parts[frozenset({2})][0] == pytest.approx(0.65, abs=1e-9)
    assert w.residual <= 1e-9


def test_wold_round_trip_pf(e2pf):
    h = build_state(e2pf, LOG2, [(frozenset(), [0.5, 0.5], 1.0)])
    w = wold_decompose(e2pf, LOG2, h.pi_trace())
    assert w.infinite_mass == pytest.approx(1.0, abs=1e-9)
    assert w.infinite_trace == pytest.approx([0.5, 0.5], abs=1e-9)


def test_wold_rejects_non_equilibrium(e1):
    with pytest.raises(NotKMSError):
        wold_decompose(e1, 0.9, [1.0])  # between log 2 and log 3: no states
    inst = validate(GraphSpec.make(1, ["u", "v"], [[[2, 0], [0, 3]]]))
    with pytest.raises(NotKMSError):
        # at beta = 1 only delta_u restricts from an equilibrium state
        wold_decompose(inst, 1.0, [0.5, 0.5])


def test_wold_mixture_with_fty(e4):
    beta = LOG3 + 0.4
    h = build_state(e4, beta, [({1, 2}, [0.2, 0.8], 1.0)])
    w = wold_decompose(e4, beta, h.pi_trace())
    mass, tau = w.parts[frozenset({1, 2})]
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert tau == pytest.approx([0.2, 0.8], abs=1e-9)


# -- ground states -------------------------------------------------------------------


def test_ground_states_single(e1):
    desc = ground_states(e1)
    assert desc.vertices == ["*"]
    assert len(desc.extreme_points) == 1


def test_ground_states_full_simplex(e2pf):
    desc = ground_states(e2pf)
    assert len(desc.extreme_points) == 2 and desc.filtered == []


def test_ground_states_filter(source_instance):
    lattice = compute_cnp_ideals(source_instance)
    desc = ground_states(source_instance, lattice)
    assert desc.vertices == ["u"]
    assert desc.filtered == ["v"]


# -- query parsing --------------------------------------------------------------------


def test_parse_path_graph(e4):
    p = parse_path(e4, {"blocks": [[0], []]})
    assert p.degree == (1, 0)
    with pytest.raises(PathError):
        parse_path(e4, {"blocks": [[0, 2], []]})  # u-loop then v-loop: no chain


def test_parse_path_mfl(golden_mfl):
    p = parse_path(golden_mfl, {"blocks": [[1, 2]]})
    assert p.degree == (2,)
    with pytest.raises(PathError):
        parse_path(golden_mfl, {"blocks": [[1, 1]]})


def test_parse_path_dynamics(dyn2):
    p = parse_path(dyn2, {"vertex": "v", "degree": [1, 0]})
    assert p.degree == (1, 0)
    with pytest.raises(PathError):
        parse_path(dyn2, {"vertex": "v"})
