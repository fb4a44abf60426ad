import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kmsphase.model import DynamicsSpec, GraphSpec, MflSpec, validate


def flip_factorization(edge_lists, i=1, j=2):
    """The coordinate flip on composable (i-then-j) 2-paths."""
    mapping = {}
    for a, (s1, _r1) in enumerate(edge_lists[i - 1]):
        for b, (_s2, r2) in enumerate(edge_lists[j - 1]):
            if s1 == r2:
                mapping[(a, b)] = (b, a)
    return {(i, j): mapping}


def edge_list(B):
    out = []
    nv = len(B)
    for w in range(nv):
        for v in range(nv):
            for _ in range(int(B[v][w])):
                out.append((w, v))
    return out


@pytest.fixture(scope="session")
def e1():
    """Single vertex, rank 2, d = (2, 3)."""
    return validate(GraphSpec.make(2, ["*"], [[[2]], [[3]]]))


@pytest.fixture(scope="session")
def e2pf():
    """Irreducible pair with common Perron eigenvalue 2."""
    return validate(GraphSpec.make(2, ["u", "v"], [[[1, 1], [1, 1]], [[0, 2], [2, 0]]]))


E4_B1 = [[2, 0], [0, 3]]
E4_B2 = [[3, 0], [0, 2]]


@pytest.fixture(scope="session")
def e4():
    """Coexistence instance diag(2,3) / diag(3,2), no factorization data."""
    return validate(GraphSpec.make(2, ["u", "v"], [E4_B1, E4_B2]))


@pytest.fixture(scope="session")
def e4_fock():
    """Same instance with the explicit flip factorization (for the oracle)."""
    fac = flip_factorization([edge_list(E4_B1), edge_list(E4_B2)])
    return validate(GraphSpec.make(2, ["u", "v"], [E4_B1, E4_B2], fac))


@pytest.fixture(scope="session")
def golden_graph():
    return validate(GraphSpec.make(1, ["a", "b"], [[[1, 1], [1, 0]]]))


@pytest.fixture(scope="session")
def golden_mfl():
    return validate(MflSpec.make(1, 2, [[[1, 1]]]))


@pytest.fixture(scope="session")
def dyn2():
    """Rank-1 dynamics: swap-free commuting pair on two vertices."""
    return validate(DynamicsSpec.make(2, ["u", "v"], [[1, 0], [1, 0]]))


@pytest.fixture(scope="session")
def source_instance():
    """Two colors, a color-1 source vertex u, nontrivial CNP lattice."""
    B = [[0, 0], [1, 1]]
    return validate(GraphSpec.make(2, ["u", "v"], [B, B]))
