"""Concrete finite-rank instances over Z+^N and their linear-algebraic shadow.

Three instance kinds are supported:

* graphs with N commuting adjacency matrices (convention: ``B_i[v][w]`` counts
  color-i edges with source ``w`` and range ``v``),
* multivariable factorial languages over forbidden words,
* vertex dynamics given by N commuting self-maps of a finite vertex set.

Every validated instance exposes nonnegative integer adjacency matrices
``B_i`` and transfer matrices ``M_i = B_i^T`` acting on functions; the adjoint
action on trace vectors is ``tau -> B_i tau``.  This convention is fixed here
and pinned by the test suite.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import language as lang
from .errors import (
    CapExceeded,
    CommutationError,
    DynamicsError,
    FactorizationError,
    LatticeError,
    UnsupportedError,
    ValidationError,
)
from .linalg import exact_int_matmul_chain
from .util import fmt_subset, full_set, parse_subset, subsets


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class GraphSpec:
    N: int
    vertices: tuple
    matrices: tuple  # N matrices as nested tuples of ints
    factorizations: dict | None = None  # {(i,j) i<j: {(ei,ej): (fj,fi)}}

    @staticmethod
    def make(N, vertices, matrices, factorizations=None):
        mats = tuple(
            tuple(tuple(int(x) for x in row) for row in M) for M in matrices
        )
        fac = None
        if factorizations is not None:
            fac = {
                (int(i), int(j)): {
                    (int(a), int(b)): (int(c), int(d))
                    for (a, b), (c, d) in mapping.items()
                }
                for (i, j), mapping in factorizations.items()
            }
        return GraphSpec(int(N), tuple(str(v) for v in vertices), mats, fac)


@dataclass(frozen=True)
class MflSpec:
    N: int
    symbols: tuple  # d_i per color
    forbidden: tuple  # normalized multiwords

    @staticmethod
    def make(N, symbols, forbidden):
        N = int(N)
        if isinstance(symbols, int):
            symbols = (symbols,) * N
        symbols = tuple(int(d) for d in symbols)
        return MflSpec(N, symbols, lang.normalize_forbidden(N, forbidden))


@dataclass(frozen=True)
class DynamicsSpec:
    N: int
    vertices: tuple
    maps: tuple  # N tuples of image indices

    @staticmethod
    def make(N, vertices, maps):
        return DynamicsSpec(
            int(N),
            tuple(str(v) for v in vertices),
            tuple(tuple(int(x) for x in m) for m in maps),
        )


# ---------------------------------------------------------------------------
# validated instance


def _edge_list(B):
    """Canonical color edge list [(src, rng), ...] from an adjacency matrix."""
    edges = []
    nv = B.shape[0]
    for w in range(nv):
        for v in range(nv):
            for _ in range(int(B[v, w])):
                edges.append((w, v))
    return tuple(edges)


@dataclass(eq=False)
class ValidatedInstance:
    kind: str
    N: int
    vertices: tuple | None
    unit_sizes: tuple
    adjacency: list | None  # N int64 arrays, trace-vector convention
    spec: object
    edges: tuple | None = None  # graph: per color, tuple of (src, rng)
    factorizations: dict | None = None
    maps: tuple | None = None
    algebra: object | None = field(default=None, repr=False)  # LanguageAlgebra
    algebra_error: str | None = None

    @property
    def dim_A(self):
        if self.adjacency is None:
            raise UnsupportedError(
                f"coefficient algebra unavailable: {self.algebra_error}"
            )
        return self.adjacency[0].shape[0]

    @property
    def has_algebra(self):
        return self.adjacency is not None

    def transfer(self, i):
        """M_i = B_i^T acting on functions on vertices."""
        if not 1 <= i <= self.N:
            raise ValueError(f"color {i} out of range 1..{self.N}")
        return self.adjacency[i - 1].T.copy()

    def transfer_all(self):
        return [self.adjacency[i].T for i in range(self.N)]

    def label(self, v):
        return self.vertices[v]

    def vertex_index(self, label):
        try:
            return self.vertices.index(str(label))
        except ValueError:
            raise ValidationError(f"unknown vertex label {label!r}") from None

    def canonical_dict(self):
        d = {"kind": self.kind, "N": self.N}
        if self.kind == "graph":
            d["vertices"] = list(self.vertices)
            d["matrices"] = [M.tolist() for M in self.adjacency]
            if self.factorizations:
                d["factorizations"] = {
                    f"{i},{j}": sorted(
                        [list(k), list(v)] for k, v in mapping.items()
                    )
                    for (i, j), mapping in self.factorizations.items()
                }
            else:
                d["factorizations"] = None
        elif self.kind == "mfl":
            d["symbols"] = list(self.spec.symbols)
            d["forbidden"] = [[list(p) for p in w] for w in self.spec.forbidden]
        else:
            d["vertices"] = list(self.vertices)
            d["maps"] = [list(m) for m in self.maps]
        return d

    def sha256(self):
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, ValidatedInstance):
            return NotImplemented
        return self.canonical_dict() == other.canonical_dict()


# ---------------------------------------------------------------------------
# validation


def _validate_graph(spec: GraphSpec):
    if spec.N < 1:
        raise ValidationError("rank N must be >= 1")
    mats = [np.array(M, dtype=np.int64) for M in spec.matrices]
    if len(mats) != spec.N:
        raise ValidationError(f"expected {spec.N} matrices, got {len(mats)}")
    nv = len(spec.vertices)
    for i, B in enumerate(mats, start=1):
        if B.shape != (nv, nv):
            raise ValidationError(f"matrix {i} is not {nv}x{nv}")
        if (B < 0).any():
            raise ValidationError(f"matrix {i} has negative entries")
    for i in range(spec.N):
        for j in range(i + 1, spec.N):
            left, right = mats[i] @ mats[j], mats[j] @ mats[i]
            if not np.array_equal(left, right):
                raise CommutationError(
                    f"B_{i + 1} B_{j + 1} != B_{j + 1} B_{i + 1}"
                )
    edges = tuple(_edge_list(B) for B in mats)

    fac = spec.factorizations
    if fac is not None:
        for (i, j), mapping in fac.items():
            if not (1 <= i < j <= spec.N):
                raise FactorizationError(f"bad color pair ({i},{j})")
            ei_list, ej_list = edges[i - 1], edges[j - 1]
            domain = {
                (a, b)
                for a in range(len(ei_list))
                for b in range(len(ej_list))
                if ei_list[a][0] == ej_list[b][1]  # s(e_i) == r(e_j)
            }
            codomain = {
                (b, a)
                for b in range(len(ej_list))
                for a in range(len(ei_list))
                if ej_list[b][0] == ei_list[a][1]  # s(f_j) == r(f_i)
            }
            if set(mapping.keys()) != domain:
                raise FactorizationError(
                    f"pair ({i},{j}): domain must be all composable "
                    f"i-then-j 2-paths ({len(domain)} expected)"
                )
            if set(mapping.values()) != codomain or len(set(mapping.values())) != len(
                mapping
            ):
                raise FactorizationError(
                    f"pair ({i},{j}): values must biject onto composable "
                    f"j-then-i 2-paths"
                )
            for (a, b), (bb, aa) in mapping.items():
                # endpoints of the 2-path are preserved
                if ei_list[a][1] != ej_list[bb][1] or ej_list[b][0] != ei_list[aa][0]:
                    raise FactorizationError(
                        f"pair ({i},{j}): image of ({a},{b}) moves an endpoint"
                    )

    inst = ValidatedInstance(
        kind="graph",
        N=spec.N,
        vertices=tuple(spec.vertices),
        unit_sizes=tuple(int(B.sum()) for B in mats),
        adjacency=mats,
        spec=spec,
        edges=edges,
        factorizations=fac,
    )
    if fac is not None and spec.N >= 3:
        from .paths import check_factorization_associativity

        check_factorization_associativity(inst)
    return inst


def _validate_mfl(spec: MflSpec):
    if spec.N < 1:
        raise ValidationError("rank N must be >= 1")
    for d in spec.symbols:
        if d < 1:
            raise ValidationError("each color needs at least one symbol")
    for omega in spec.forbidden:
        for c, part in enumerate(omega, start=1):
            for s in part:
                if not 1 <= s <= spec.symbols[c - 1]:
                    raise ValidationError(
                        f"forbidden word uses symbol {s} outside color {c} range"
                    )
    for c in range(1, spec.N + 1):
        singles = [
            lang.append_symbol(lang.empty_word(spec.N), c, s)
            for s in range(1, spec.symbols[c - 1] + 1)
        ]
        if not any(lang.word_allowable(w, spec.forbidden) for w in singles):
            raise lang.LanguageError(
                f"no allowable single-symbol word for color {c}"
            )

    algebra = None
    adjacency = None
    vertices = None
    err = None
    try:
        automaton = lang.build_follower_automaton(
            spec.N, spec.symbols, spec.forbidden
        )
        algebra = lang.build_language_algebra(automaton)
        adjacency = algebra.adjacency
        vertices = tuple(f"a{i}" for i in range(algebra.dim))
    except CapExceeded as exc:  # counting-only instance
        err = str(exc)

    return ValidatedInstance(
        kind="mfl",
        N=spec.N,
        vertices=vertices,
        unit_sizes=tuple(spec.symbols),
        adjacency=adjacency,
        spec=spec,
        algebra=algebra,
        algebra_error=err,
    )


def _validate_dynamics(spec: DynamicsSpec):
    if spec.N < 1:
        raise ValidationError("rank N must be >= 1")
    nv = len(spec.vertices)
    if len(spec.maps) != spec.N:
        raise ValidationError(f"expected {spec.N} maps")
    for i, m in enumerate(spec.maps, start=1):
        if len(m) != nv or any(not 0 <= x < nv for x in m):
            raise ValidationError(f"map {i} is not a self-map of the vertex set")
    for i in range(spec.N):
        for j in range(i + 1, spec.N):
            mi, mj = spec.maps[i], spec.maps[j]
            if any(mi[mj[v]] != mj[mi[v]] for v in range(nv)):
                raise DynamicsError(f"maps {i + 1} and {j + 1} do not commute")
    mats = []
    for m in spec.maps:
        B = np.zeros((nv, nv), dtype=np.int64)
        for w, v in enumerate(m):
            B[v, w] = 1
        mats.append(B)
    return ValidatedInstance(
        kind="dynamics",
        N=spec.N,
        vertices=tuple(spec.vertices),
        unit_sizes=(1,) * spec.N,
        adjacency=mats,
        spec=spec,
        maps=spec.maps,
    )


def validate(spec):
    """Validate a spec and return the instance with its transfer matrices."""
    if isinstance(spec, GraphSpec):
        return _validate_graph(spec)
    if isinstance(spec, MflSpec):
        return _validate_mfl(spec)
    if isinstance(spec, DynamicsSpec):
        return _validate_dynamics(spec)
    raise ValidationError(f"unknown spec type {type(spec).__name__}")


# ---------------------------------------------------------------------------
# transfer operations


def transfer_map(instance, i):
    """M_i with M_i[a][b] = B_i[b][a]; on trace vectors the adjoint is B_i."""
    return instance.transfer(i)


def multidegree_transfer(instance, n):
    """prod_i M_i^{n_i}, exact; switches to float64 with a warning on overflow."""
    n = tuple(int(x) for x in n)
    if len(n) != instance.N or any(x < 0 for x in n):
        raise ValueError(f"bad multi-index {n} for rank {instance.N}")
    mats = [instance.transfer(i) for i in range(1, instance.N + 1)]
    out, overflowed = exact_int_matmul_chain(mats, n)
    if overflowed:
        warnings.warn(
            "multidegree transfer exceeded 64-bit range; result is float64",
            RuntimeWarning,
            stacklevel=2,
        )
    return out


# ---------------------------------------------------------------------------
# ideals


@dataclass(frozen=True)
class VertexIdeal:
    """An ideal of the commutative coefficient algebra: a set of vertices."""

    vertices: frozenset

    def labels(self, instance):
        return sorted(instance.label(v) for v in self.vertices)

    def indicator(self, dim):
        vec = np.zeros(dim, dtype=np.int64)
        for v in self.vertices:
            vec[v] = 1
        return vec

    def __contains__(self, v):
        return v in self.vertices

    def __len__(self):
        return len(self.vertices)


def _bool_adj(instance):
    return [(B != 0) for B in instance.adjacency]


def compute_fI(instance, F):
    """Vertices not receiving arbitrarily long F-supported paths.

    Survivor sets shrink monotonically and stabilize within dim_A steps, so
    the loop below terminates with the exact kernel of A -> the F-covariant
    quotient.
    """
    F = frozenset(F)
    if not F:
        raise ValueError("F must be nonempty")
    if not instance.has_algebra:
        raise UnsupportedError(
            f"fI unavailable for this instance: {instance.algebra_error}"
        )
    dim = instance.dim_A
    acc = np.eye(dim, dtype=np.int64)
    for i in sorted(F):
        acc = (acc @ (instance.adjacency[i - 1] != 0).astype(np.int64) > 0).astype(
            np.int64
        )
    # acc is the support of prod_{i in F} B_i
    survivors = np.ones(dim, dtype=bool)
    for _ in range(dim):
        new = (acc @ survivors.astype(np.int64)) > 0
        if np.array_equal(new, survivors):
            break
        survivors = new
    return VertexIdeal(frozenset(int(v) for v in np.nonzero(~survivors)[0]))


@dataclass
class IdealLattice:
    """Map from nonempty color subsets F to perp-invariant vertex ideals."""

    N: int
    ideals: dict  # frozenset -> VertexIdeal

    def get(self, F):
        return self.ideals.get(frozenset(F), VertexIdeal(frozenset()))

    def to_json_dict(self, instance):
        return {
            "ideals": {
                fmt_subset(F): ideal.labels(instance)
                for F, ideal in sorted(self.ideals.items(), key=lambda kv: sorted(kv[0]))
            }
        }

    @staticmethod
    def from_json_dict(instance, data):
        ideals = {}
        for key, labels in data.get("ideals", {}).items():
            F = parse_subset(key)
            if not F:
                raise LatticeError("lattice keys must be nonempty subsets")
            ideals[F] = VertexIdeal(
                frozenset(instance.vertex_index(l) for l in labels)
            )
        lattice = IdealLattice(instance.N, ideals)
        validate_lattice(instance, lattice)
        return lattice


def zero_lattice(N):
    return IdealLattice(N, {})


def validate_lattice(instance, lattice):
    """Check monotonicity and perp-invariance of an ideal family."""
    Ms = [instance.transfer(i) for i in range(1, instance.N + 1)]
    items = list(lattice.ideals.items())
    for F, ideal in items:
        if not F or not F <= full_set(instance.N):
            raise LatticeError(f"bad subset {fmt_subset(F)}")
        for Fp, idealp in items:
            if F < Fp and not ideal.vertices <= idealp.vertices:
                raise LatticeError(
                    f"not monotone: I_{fmt_subset(F)} !<= I_{fmt_subset(Fp)}"
                )
        for i in range(1, instance.N + 1):
            if i in F:
                continue
            M = Ms[i - 1]
            for v in ideal.vertices:
                targets = set(int(w) for w in np.nonzero(M[:, v])[0])
                if not targets <= ideal.vertices:
                    raise LatticeError(
                        f"I_{fmt_subset(F)} not perp-invariant along color {i} "
                        f"at vertex {instance.label(v)}"
                    )


def compute_cnp_ideals(instance):
    """The largest lattice: for each F the biggest perp-invariant ideal in J_F."""
    if not instance.has_algebra:
        raise UnsupportedError(
            f"CNP ideals unavailable: {instance.algebra_error}"
        )
    dim = instance.dim_A
    bools = _bool_adj(instance)
    # step_i(v) = sources of color-i edges into v = support of row v of B_i
    ideals = {}
    for F in subsets(range(1, instance.N + 1), include_empty=False):
        common_kernel = np.ones(dim, dtype=bool)
        for i in sorted(F):
            common_kernel &= ~bools[i - 1].any(axis=1)
        J = set(int(v) for v in np.nonzero(~common_kernel)[0])
        S = set(J)
        changed = True
        while changed:
            changed = False
            for v in sorted(S):
                for i in range(1, instance.N + 1):
                    if i in F:
                        continue
                    targets = set(
                        int(w) for w in np.nonzero(bools[i - 1][v])[0]
                    )
                    if not targets <= S:
                        S.discard(v)
                        changed = True
                        break
        ideals[F] = VertexIdeal(frozenset(S))
    lattice = IdealLattice(instance.N, ideals)
    validate_lattice(instance, lattice)
    return lattice


# ---------------------------------------------------------------------------
# language counting wrappers


def _mfl_spec_of(obj):
    if isinstance(obj, MflSpec):
        return obj
    if isinstance(obj, ValidatedInstance) and obj.kind == "mfl":
        return obj.spec
    raise UnsupportedError("allowable-word counting needs an mfl spec")


def mfl_allowable_words(obj, k, F=None, return_words=False, cap=10_000):
    """Exact count of allowable F-supported words of total length k."""
    spec = _mfl_spec_of(obj)
    if k < 0:
        raise ValueError("length must be >= 0")
    F = full_set(spec.N) if F is None else frozenset(F)
    if return_words:
        words = []
        count = lang.count_words(spec.N, spec.symbols, spec.forbidden, k, F, collect=words)
        if count > cap:
            raise CapExceeded(f"word list of size {count} exceeds cap {cap}")
        return count, words
    return lang.count_words(spec.N, spec.symbols, spec.forbidden, k, F)


# ---------------------------------------------------------------------------
# JSON loading


def instance_from_dict(data):
    kind = data.get("kind")
    if kind == "graph":
        fac = data.get("factorizations")
        factorizations = None
        if fac:
            factorizations = {}
            for key, pairs in fac.items():
                i, j = (int(p) for p in key.split(","))
                factorizations[(i, j)] = {
                    (int(a), int(b)): (int(c), int(e))
                    for (a, b), (c, e) in (map(tuple, pair) for pair in pairs)
                }
        spec = GraphSpec.make(
            data["N"], data["vertices"], data["matrices"], factorizations
        )
    elif kind == "mfl":
        spec = MflSpec.make(data["N"], data["symbols"], data["forbidden"])
    elif kind == "dynamics":
        spec = DynamicsSpec.make(data["N"], data["vertices"], data["maps"])
    else:
        raise ValidationError(f"unknown instance kind {kind!r}")
    return validate(spec)


def load_instance(path):
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
