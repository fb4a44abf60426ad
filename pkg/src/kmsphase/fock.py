"""Truncated Fock model: explicit operators, identity checks, oracle sums.

The basis consists of all basis paths with multidegree in the box n <= K*1.
Creation operators of the generators are exact 0/1 (graph, language) or
permutation-like (dynamics) sparse integer matrices, so every identity check
below runs in exact integer arithmetic; floats enter only through beta.

Truncation discipline: each identity is compared only on columns whose degree
leaves room for the identity's maximal degree shift, so clipped terms never
masquerade as failures.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import OutOfTruncation, PathError, SizeCap, UnsupportedError
from .paths import path_algebra, source_vector
from .simplex import certificate
from .util import full_set, multi_indices_box, subsets

DEFAULT_SIZE_CAP = 1_000_000


def _generators(instance, color):
    if instance.kind == "graph":
        return list(range(len(instance.edges[color - 1])))
    if instance.kind == "mfl":
        return list(range(1, instance.unit_sizes[color - 1] + 1))
    return [0]


def _chain(instance, path):
    """Generator tokens of a basis path in operator order (left to right)."""
    if path.kind == "graph":
        return list(path.data[0])
    if path.kind == "mfl":
        return [
            (c, s) for c, part in enumerate(path.data, start=1) for s in part
        ]
    return [
        (c, 0)
        for c, reps in enumerate(path.degree, start=1)
        for _ in range(reps)
    ]


class TruncatedFock:
    def __init__(self, instance, K, basis, alg):
        self.instance = instance
        self.K = K
        self.alg = alg
        self.basis = basis
        self.index = {p: i for i, p in enumerate(basis)}
        self.degrees = [p.degree for p in basis]
        self.dim = len(basis)
        self.creation = {}
        for color in range(1, instance.N + 1):
            for gen in _generators(instance, color):
                rows, cols = [], []
                for j, p in enumerate(basis):
                    q = alg.create(color, gen, p)
                    if q is None:
                        continue
                    i = self.index.get(q)
                    if i is None:  # truncated away
                        continue
                    rows.append(i)
                    cols.append(j)
                self.creation[(color, gen)] = sparse.csr_matrix(
                    (np.ones(len(rows), dtype=np.int64), (rows, cols)),
                    shape=(self.dim, self.dim),
                )

    # -- degree bookkeeping ------------------------------------------------

    def interior_columns(self, shift):
        """Columns whose degree plus `shift` stays inside the box."""
        K1 = (self.K,) * self.instance.N
        return np.array(
            [
                all(d + s <= k for d, s, k in zip(deg, shift, K1))
                for deg in self.degrees
            ]
        )

    def _diag(self, values):
        return sparse.diags(np.asarray(values, dtype=np.int64), format="csr")

    def identity(self):
        return sparse.identity(self.dim, dtype=np.int64, format="csr")

    # -- operators -----------------------------------------------------------

    def creation_op(self, path):
        """t(x_path) as a truncated matrix, from its action q -> path * q.

        Composition encodes the full left action (including the degree-zero
        vertex projection), so this is exact for every instance kind.
        """
        rows, cols = [], []
        for j, p in enumerate(self.basis):
            q = self.alg.compose(path, p)
            if q is None:
                continue
            i = self.index.get(q)
            if i is None:
                continue
            rows.append(i)
            cols.append(j)
        return sparse.csr_matrix(
            (np.ones(len(rows), dtype=np.int64), (rows, cols)),
            shape=(self.dim, self.dim),
        )

    def pi_diag(self, a):
        """pi(a) for a function on vertices, as a diagonal matrix."""
        from .paths import range_index

        a = np.asarray(a)
        vals = [a[range_index(self.instance, p)] for p in self.basis]
        if np.issubdtype(a.dtype, np.integer):
            return self._diag(np.asarray(vals, dtype=np.int64))
        return sparse.diags(np.asarray(vals, dtype=float), format="csr")

    def generator_support_diag(self, color, gen):
        """pi(<x_{color,gen}, x_{color,gen}>); exact for every kind."""
        vals = [
            1 if self.alg.create(color, gen, p) is not None else 0
            for p in self.basis
        ]
        return self._diag(vals)

    def p_n(self, n):
        self._check_box(n)
        return self._diag([1 if deg == tuple(n) else 0 for deg in self.degrees])

    def P_ki(self, color, k):
        if k > self.K:
            raise OutOfTruncation(f"P_{k}*{color} exceeds truncation {self.K}")
        return self._diag(
            [1 if deg[color - 1] >= k else 0 for deg in self.degrees]
        )

    def P_i(self, color):
        """sum_j t(x_{i,j}) t(x_{i,j})^*, from the creation matrices."""
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.int64)
        for gen in _generators(self.instance, color):
            T = self.creation[(color, gen)]
            out = out + T @ T.T
        return out

    def P_F(self, F):
        out = self.identity()
        for i in sorted(F):
            out = out @ self.P_i(i)
        return out

    def Q_F(self, F):
        out = self.identity()
        for i in sorted(F):
            out = out @ (self.identity() - self.P_i(i))
        return out

    def Q_F_n(self, F, n):
        """sum over paths of degree n of t(x_mu) Q_F t(x_mu)^*."""
        self._check_box(n)
        F = frozenset(F)
        if all(x == 0 for x in n):
            return self.Q_F(F)
        QF = self.Q_F(F)
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.int64)
        for p in self.alg.enumerate(tuple(n)):
            T = self.creation_op(p)
            out = out + T @ QF @ T.T
        return out

    def R_F_m(self, F, m, k):
        """Positive form of the alternating projection sum at window k."""
        self._check_box(m)
        if k + 1 > self.K:
            raise OutOfTruncation(f"window k={k} needs K >= {k + 1}")
        F = frozenset(F)
        mid = self.Q_F(F)
        for i in sorted(full_set(self.instance.N) - F):
            mid = self.P_ki(i, k + 1) @ mid
        if all(x == 0 for x in m):
            return mid
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.int64)
        for p in self.alg.enumerate(tuple(m)):
            T = self.creation_op(p)
            out = out + T @ mid @ T.T
        return out

    def _check_box(self, n):
        if len(n) != self.instance.N or any(x < 0 or x > self.K for x in n):
            raise OutOfTruncation(f"multidegree {tuple(n)} outside box K={self.K}")


def build_fock(instance, K, size_cap=DEFAULT_SIZE_CAP):
    """Enumerate the truncated basis and assemble all creation matrices."""
    if K < 1:
        raise ValueError("K must be >= 1")
    alg = path_algebra(instance)  # raises FactorizationRequired when needed
    basis = []
    for n in multi_indices_box(K, range(1, instance.N + 1), instance.N):
        layer = alg.enumerate(n)
        basis.extend(layer)
        if len(basis) > size_cap:
            raise SizeCap(f"truncated basis exceeds {size_cap} vectors")
    return TruncatedFock(instance, K, basis, alg)


def projection(fock, kind, **kwargs):
    """Dispatcher mirroring the projection families by name."""
    if kind == "p_n":
        return fock.p_n(kwargs["n"])
    if kind == "P_i":
        return fock.P_i(kwargs["i"])
    if kind == "P_ki":
        return fock.P_ki(kwargs["i"], kwargs["k"])
    if kind == "P_F":
        return fock.P_F(kwargs["F"])
    if kind == "Q_F":
        return fock.Q_F(kwargs["F"])
    if kind == "Q_F_n":
        return fock.Q_F_n(kwargs["F"], kwargs["n"])
    if kind == "R_F_m":
        return fock.R_F_m(kwargs["F"], kwargs["m"], kwargs["k"])
    raise ValueError(f"unknown projection kind {kind!r}")


def conditional_expectation(fock, op):
    """Compress to the multidegree-diagonal blocks (gauge fixed points)."""
    op = sparse.csr_matrix(op).tocoo()
    keep = [
        idx
        for idx in range(op.nnz)
        if fock.degrees[op.row[idx]] == fock.degrees[op.col[idx]]
    ]
    return sparse.csr_matrix(
        (op.data[keep], (op.row[keep], op.col[keep])), shape=op.shape
    )


# ---------------------------------------------------------------------------
# identity report


@dataclass
class IdentityCheck:
    name: str
    residual: float
    exact_zero: bool
    passed: bool
    detail: str = ""


@dataclass
class IdentityReport:
    checks: list = field(default_factory=list)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    @property
    def max_residual(self):
        return max((c.residual for c in self.checks), default=0.0)

    def to_json_dict(self):
        return {
            "all_passed": self.all_passed,
            "checks": [
                {
                    "name": c.name,
                    "residual": c.residual,
                    "exact_zero": c.exact_zero,
                    "passed": c.passed,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _residual_on(diff, col_mask):
    diff = sparse.csr_matrix(diff).tocoo()
    worst = 0
    for r, c, v in zip(diff.row, diff.col, diff.data):
        if col_mask[c] and v != 0:
            worst = max(worst, abs(int(v)))
    return worst


def _record(report, name, diff, col_mask, detail=""):
    res = _residual_on(diff, col_mask)
    report.checks.append(
        IdentityCheck(
            name=name,
            residual=float(res),
            exact_zero=(res == 0),
            passed=(res == 0),
            detail=detail,
        )
    )


def check_identities(fock, nica_degree_cap=1):
    """Run every operator identity on its truncation interior.

    All matrices are integer, so residuals of valid data are exactly zero.
    """
    inst = fock.instance
    N = inst.N
    report = IdentityReport()
    ident = fock.identity()
    qcache = {}

    def QFn(F, n):
        key = (frozenset(F), tuple(n))
        if key not in qcache:
            qcache[key] = fock.Q_F_n(*key)
        return qcache[key]

    # t(x_{i,j})^* t(x_{i,l}) = delta_{jl} pi(<x_{i,j}, x_{i,j}>)
    for i in range(1, N + 1):
        mask = fock.interior_columns(tuple(1 if c == i else 0 for c in range(1, N + 1)))
        gens = _generators(inst, i)
        worst = None
        for j in gens:
            for l in gens:
                lhs = fock.creation[(i, j)].T @ fock.creation[(i, l)]
                rhs = (
                    fock.generator_support_diag(i, j)
                    if j == l
                    else sparse.csr_matrix((fock.dim, fock.dim), dtype=np.int64)
                )
                r = _residual_on(lhs - rhs, mask)
                worst = r if worst is None else max(worst, r)
        report.checks.append(
            IdentityCheck(
                name=f"annihilation_inner_product_color{i}",
                residual=float(worst or 0),
                exact_zero=(not worst),
                passed=(not worst),
            )
        )

    # sum_j t t^* = P_i as a degree projection
    allcols = np.ones(fock.dim, dtype=bool)
    for i in range(1, N + 1):
        diff = fock.P_i(i) - fock.P_ki(i, 1)
        _record(report, f"rank_one_sum_color{i}", diff, allcols)

    # vacuum shifts: Q_F^n Q_C^m = delta_{n, m_F} Q_C^m for F <= C, n in F
    box = min(fock.K, 2)
    for C in subsets(range(1, N + 1), include_empty=False):
        for F in subsets(sorted(C), include_empty=False):
            worst = 0
            for m in multi_indices_box(box, C, N):
                QCm = QFn(C, m)
                for n in multi_indices_box(box, F, N):
                    mF = tuple(
                        x if (c + 1) in F else 0 for c, x in enumerate(m)
                    )
                    delta = 1 if tuple(n) == mF else 0
                    diff = QFn(F, n) @ QCm - delta * QCm
                    worst = max(worst, _residual_on(diff, allcols))
            report.checks.append(
                IdentityCheck(
                    name=f"vacuum_shift_orthogonality_F{sorted(F)}_C{sorted(C)}",
                    residual=float(worst),
                    exact_zero=(worst == 0),
                    passed=(worst == 0),
                )
            )

    # creation intertwining: Q_F^n t(x_{i,j}) = [n >= e_i|_F] t(x_{i,j}) Q_F^{n - e_i|_F}
    for F in subsets(range(1, N + 1), include_empty=False):
        worst = 0
        for i in range(1, N + 1):
            shift = tuple(1 if c == i else 0 for c in range(1, N + 1))
            mask = fock.interior_columns(shift)
            eiF = tuple(1 if (c == i and i in F) else 0 for c in range(1, N + 1))
            for n in multi_indices_box(min(fock.K, 2), F, N):
                lower = tuple(a - b for a, b in zip(n, eiF))
                for j in _generators(inst, i):
                    T = fock.creation[(i, j)]
                    lhs = QFn(F, n) @ T
                    if all(x >= 0 for x in lower):
                        rhs = T @ QFn(F, lower)
                    else:
                        rhs = sparse.csr_matrix((fock.dim, fock.dim), dtype=np.int64)
                    worst = max(worst, _residual_on(lhs - rhs, mask))
        report.checks.append(
            IdentityCheck(
                name=f"creation_intertwine_F{sorted(F)}",
                residual=float(worst),
                exact_zero=(worst == 0),
                passed=(worst == 0),
            )
        )

    # alternating sums: R_F^m(k) = sum_{C >= F} (-1)^{|C\F|} sum_w Q_C^{m+w}
    k = fock.K - 1
    for F in subsets(range(1, N + 1), include_empty=False):
        worst = 0
        for m in multi_indices_box(min(k, 1), F, N):
            rhs = sparse.csr_matrix((fock.dim, fock.dim), dtype=np.int64)
            for C in subsets(range(1, N + 1), include_empty=False):
                if not F <= frozenset(C):
                    continue
                sign = (-1) ** (len(C) - len(F))
                for w in multi_indices_box(k, frozenset(C) - F, N):
                    rhs = rhs + sign * QFn(C, tuple(a + b for a, b in zip(m, w)))
            diff = fock.R_F_m(F, m, k) - rhs
            worst = max(worst, _residual_on(diff, allcols))
        report.checks.append(
            IdentityCheck(
                name=f"alternating_projection_sum_F{sorted(F)}",
                residual=float(worst),
                exact_zero=(worst == 0),
                passed=(worst == 0),
            )
        )

    # Q over the empty set is the unit
    _record(report, "empty_set_unit", fock.Q_F(frozenset()) - ident, allcols)

    # Nica covariance on degree projections: P^(n) P^(m) = P^(n v m)
    def big_P(n):
        out = ident
        for c, reps in enumerate(n, start=1):
            if reps:
                out = out @ fock.P_ki(c, reps)
        return out

    worst = 0
    cap = min(nica_degree_cap, fock.K)
    degs = [n for n in multi_indices_box(cap, range(1, N + 1), N)]
    for n in degs:
        for m in degs:
            join = tuple(max(a, b) for a, b in zip(n, m))
            diff = big_P(n) @ big_P(m) - big_P(join)
            worst = max(worst, _residual_on(diff, allcols))
    report.checks.append(
        IdentityCheck(
            name="nica_join_projections",
            residual=float(worst),
            exact_zero=(worst == 0),
            passed=(worst == 0),
        )
    )

    # Nica covariance on rank-one compacts via finite-rank insertions
    worst = 0
    small = [
        n
        for n in multi_indices_box(cap, range(1, N + 1), N)
        if 0 < sum(n)
    ]
    for n in small:
        for m in small:
            join = tuple(max(a, b) for a, b in zip(n, m))
            if any(j > fock.K for j in join):
                continue
            mask = fock.interior_columns(join)
            paths_n = fock.alg.enumerate(n)
            paths_m = fock.alg.enumerate(m)
            pairs_n = [(p, p) for p in paths_n[:4]]
            pairs_m = [(p, p) for p in paths_m[:4]]
            if len(paths_n) > 1:
                pairs_n.append((paths_n[0], paths_n[1]))
            if len(paths_m) > 1:
                pairs_m.append((paths_m[1], paths_m[0]))
            sig_n = tuple(a - b for a, b in zip(join, n))
            sig_m = tuple(a - b for a, b in zip(join, m))
            fills_n = fock.alg.enumerate(sig_n)
            fills_m = fock.alg.enumerate(sig_m)
            for mu, nu in pairs_n:
                Tmu, Tnu = fock.creation_op(mu), fock.creation_op(nu)
                for lam, rho in pairs_m:
                    Tlam, Trho = fock.creation_op(lam), fock.creation_op(rho)
                    lhs = Tmu @ Tnu.T @ Tlam @ Trho.T
                    rhs = sparse.csr_matrix((fock.dim, fock.dim), dtype=np.int64)
                    for s1 in fills_n:
                        b = fock.alg.compose(nu, s1)
                        if b is None:
                            continue
                        a = fock.alg.compose(mu, s1)
                        if a is None:
                            continue
                        for s2 in fills_m:
                            c = fock.alg.compose(lam, s2)
                            if c is None or c != b:
                                continue
                            dpath = fock.alg.compose(rho, s2)
                            if dpath is None:
                                continue
                            rhs = rhs + fock.creation_op(a) @ fock.creation_op(dpath).T
                    worst = max(worst, _residual_on(lhs - rhs, mask))
    report.checks.append(
        IdentityCheck(
            name="nica_rank_one_compacts",
            residual=float(worst),
            exact_zero=(worst == 0),
            passed=(worst == 0),
        )
    )

    # Fowler degree support: t(x_nu)^* t(x_lam) lives in fixed degree bands
    worst = 0
    gen_paths = []
    for i in range(1, N + 1):
        for j in _generators(inst, i)[:3]:
            deg = tuple(1 if c == i else 0 for c in range(1, N + 1))
            for p in fock.alg.enumerate(deg):
                gen_paths.append(p)
                break
    for nu in gen_paths:
        for lam in gen_paths:
            M = (fock.creation_op(nu).T @ fock.creation_op(lam)).tocoo()
            wedge = tuple(min(a, b) for a, b in zip(nu.degree, lam.degree))
            up = tuple(a - w for a, w in zip(lam.degree, wedge))
            down = tuple(a - w for a, w in zip(nu.degree, wedge))
            for r, c, v in zip(M.row, M.col, M.data):
                if v == 0:
                    continue
                drow, dcol = fock.degrees[r], fock.degrees[c]
                expected = tuple(a - b for a, b in zip(up, down))
                if tuple(a - b for a, b in zip(drow, dcol)) != expected:
                    worst = max(worst, abs(int(v)))
    report.checks.append(
        IdentityCheck(
            name="fowler_degree_support",
            residual=float(worst),
            exact_zero=(worst == 0),
            passed=(worst == 0),
        )
    )
    return report


# ---------------------------------------------------------------------------
# oracle sums


@dataclass
class OracleValue:
    value: float
    tail_bound: float | None
    certified: bool
    partition_partial: float

    def brackets(self, closed_value, slack=1e-12):
        if not self.certified:
            return None
        return abs(closed_value - self.value) <= self.tail_bound + slack


def _partial_gibbs(instance, tau, beta, F, K):
    """sum over the box {n in F, n <= K 1} of e^{-|n| beta} B^n tau."""
    g = np.asarray(tau, dtype=float).copy()
    ebeta = math.exp(beta)
    for i in sorted(F):
        B = instance.adjacency[i - 1].astype(float)
        acc = g.copy()
        term = g
        for _ in range(K):
            term = (B @ term) / ebeta
            acc = acc + term
        g = acc
    return g


def oracle_state_eval(fock, handle, query, K=None, brute=False):
    """Evaluate a single-component state by direct truncated summation.

    Sums the defining series term by term over the box of F-supported
    multidegrees up to K (grouped by multidegree; `brute` instead enumerates
    every basis word, for cross-checks at small K).  Returns the value with a
    geometric tail bound when the spectral certificate is available.
    """
    if len(handle.components) != 1:
        raise UnsupportedError("oracle evaluation needs a single-component state")
    comp = handle.components[0]
    instance = handle.instance
    K = fock.K if K is None else int(K)
    beta = handle.beta
    ebeta = math.exp(beta)
    F = comp.F

    if brute:
        gK = _brute_weighted(fock, comp.tau, beta, F, K)
    else:
        gK = _partial_gibbs(instance, comp.tau, beta, F, K)
    cK = float(gK.sum())

    if query.kind == "diag":
        a = np.asarray(query.a, dtype=float)
        raw = float(gK @ a)
    else:
        mu, nu = query.mu, query.nu
        if not fock.alg.is_valid(mu) or not fock.alg.is_valid(nu):
            raise PathError("query paths are invalid for this instance")
        if mu.degree != nu.degree or mu != nu:
            return OracleValue(0.0, 0.0, True, cK)
        src = source_vector(instance, mu).astype(float)
        raw = math.exp(-beta * mu.length) * float(gK @ src)
    value = raw / cK

    support = [int(v) for v in np.nonzero(comp.tau > 1e-14)[0]]
    ok, _q, _cl = certificate(instance, support, F, ebeta)
    if not ok:
        return OracleValue(value, None, False, cK)
    gfull, cfull = comp.gibbs, comp.c
    if query.kind == "diag":
        raw_full = float(gfull @ np.asarray(query.a, dtype=float))
    else:
        raw_full = math.exp(-beta * query.mu.length) * float(
            gfull @ source_vector(instance, query.mu).astype(float)
        )
    tail_num = max(raw_full - raw, 0.0)
    tail_c = max(cfull - cK, 0.0)
    bound = (tail_num * cK + abs(raw) * tail_c) / (cK * cfull) + 1e-15
    return OracleValue(value, bound, True, cK)


def _brute_weighted(fock, tau, beta, F, K):
    """Word-level version of the partial Gibbs vector (tests, small K).

    Accumulates tau(<x_mu, a x_mu>) one basis word at a time, which for
    languages needs the full right-conjugation action, not just the range.
    """
    instance = fock.instance
    tau = np.asarray(tau, dtype=float)
    g = np.zeros(instance.dim_A)
    if instance.kind == "mfl":
        algebra = instance.algebra
        aut = algebra.automaton
        atoms = algebra.atoms
        for n in multi_indices_box(K, F, instance.N):
            for p in fock.alg.enumerate(n):
                w = math.exp(-beta * p.length)
                runs = {m: aut.run(m, p.data) for m in range(aut.n_states)}
                start_state = runs[aut.start]
                for pi, P in enumerate(atoms):
                    if start_state not in P:
                        continue
                    image = frozenset(
                        m for m in range(aut.n_states) if runs[m] in P
                    )
                    target = algebra.atom_index.get(image)
                    if target is not None:
                        g[target] += w * tau[pi]
        return g
    from .paths import range_index

    for n in multi_indices_box(K, F, instance.N):
        for p in fock.alg.enumerate(n):
            w = math.exp(-beta * p.length)
            src = source_vector(instance, p).astype(float)
            g[range_index(instance, p)] += w * float(src @ tau)
    return g


def check_kms(fock, handle, degree_bound, K=None):
    """Max residual of the equilibrium structure over truncated evaluations.

    Samples exhaustively up to `degree_bound` and checks
      * the one-sided commutation relation on monomial triples (the two
        sides realign the truncated series through different compositions),
      * gauge invariance (off-multidegree-diagonal monomials vanish),
      * the vacuum-shift mass normalization with its geometric tail,
      * vanishing of the defect projections of colors outside each part.

    Every value is a truncated direct sum; nothing here uses the Neumann
    closed form, so this is an independent consistency oracle.
    """
    instance = handle.instance
    K = (4 * fock.K + 60) if K is None else int(K)
    beta = handle.beta
    ebeta = math.exp(beta)
    worst = 0.0

    paths = []
    for n in multi_indices_box(max(degree_bound), range(1, instance.N + 1), instance.N):
        if any(a > b for a, b in zip(n, degree_bound)):
            continue
        paths.extend(fock.alg.enumerate(n))

    cache = []
    for comp in handle.components:
        gK = _partial_gibbs(instance, comp.tau, beta, comp.F, K)
        cache.append((comp, gK, float(gK.sum())))

    def phi_monomial(mu, nu, weight=None):
        """Truncated value of t(x_mu) pi(weight) t(x_nu)^* on the mixture."""
        if mu is None or nu is None:
            return 0.0
        if mu.degree != nu.degree or mu != nu:
            return 0.0
        src = source_vector(instance, mu).astype(float)
        if weight is not None:
            src = src * weight
        scale = math.exp(-beta * mu.length)
        return sum(
            comp.weight * scale * float(gK @ src) / cK for comp, gK, cK in cache
        )

    # (a) phi(t(x_lam) t(x_kap) t(x_rho)^*)
    #       = e^{-|lam| beta} phi(t(x_kap) pi(<x_rho, x_rho>) t(tail)^*)
    # whenever lam is the degree-|lam| head of rho (both sides vanish
    # otherwise); the source projection of the full rho survives stripping.
    short = [p for p in paths if p.length <= 1]
    for lam in paths:
        for rho in paths:
            if any(a > b for a, b in zip(lam.degree, rho.degree)):
                continue
            head, tail = fock.alg.decompose(rho, lam.degree)
            rho_src = source_vector(instance, rho).astype(float)
            for kap in short:
                left = fock.alg.compose(lam, kap)
                lhs = phi_monomial(left, rho)
                rhs = 0.0
                if head == lam:
                    rhs = math.exp(-beta * lam.length) * phi_monomial(
                        kap, tail, weight=rho_src
                    )
                worst = max(worst, abs(lhs - rhs))

    # (b) gauge invariance through the conditional expectation
    for mu in paths[:20]:
        for nu in paths[:20]:
            if mu.degree != nu.degree:
                worst = max(worst, abs(phi_monomial(mu, nu)))

    # (c) mass normalization: the alternating vacuum-shift sums telescope to
    # 1 - prod_i (e^-beta B_i)^{K+1}-tails for genuine traces
    for comp, gK, cK in cache:
        vec = gK.copy()
        for i in sorted(comp.F):
            B = instance.adjacency[i - 1].astype(float)
            vec = vec - (B @ vec) / ebeta
        for i in sorted(comp.F):
            B = instance.adjacency[i - 1].astype(float)
            acc = vec.copy()
            term = vec
            for _ in range(K):
                term = (B @ term) / ebeta
                acc = acc + term
            vec = acc
        worst = max(worst, abs(float(vec.sum()) / cK - 1.0))

        # (d) defect projections of colors outside F must carry no mass
        for i in sorted(full_set(instance.N) - comp.F):
            B = instance.adjacency[i - 1].astype(float)
            defect = 1.0 - float((B @ gK).sum()) / (ebeta * cK)
            worst = max(worst, abs(defect))
    return worst
