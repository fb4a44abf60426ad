"""Equilibrium states: partition values, closed-form evaluation, Wold parts.

A gauge-invariant equilibrium state is carried by its convex components
(F, tau_F, weight).  Each component caches the Gibbs vector

    g = sum_{n in F} e^{-|n| beta} B^n tau,

computed on the forward closure of the trace support via per-color Neumann
solves; the partition value is c^F = <g, 1> and the restriction to the
diagonal algebra is g / c^F.  Monomials evaluate through the source
projection of their path and the multidegree-diagonal delta factor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, MembershipError, NegativeMassError, NotKMSError, PathError
from .linalg import forward_closure, submatrix
from .paths import path_algebra, source_vector
from .simplex import CERT_MARGIN, RESID_TOL, certificate, is_member
from .util import fmt_subset, full_set, neumann_apply, shell_sums, subsets, supersets

PARTIAL_SHELL_CAP = 2048
PARTIAL_INCREMENT_TOL = 1e-12
MASS_CLAMP = 1e-9


@dataclass
class PartitionValue:
    value: float  # math.inf when divergent
    finite: bool
    certificate_rho: float
    support: tuple

    def to_json_dict(self):
        return {
            "value": None if not self.finite else float(self.value),
            "finite": self.finite,
            "certificate_rho": float(self.certificate_rho),
        }


def _gibbs_vector(instance, tau, beta, F):
    """(g, c, ok, q, closure): the Neumann sum over F applied to tau."""
    tau = np.asarray(tau, dtype=float)
    ebeta = math.exp(beta)
    support = [int(v) for v in np.nonzero(np.abs(tau) > 1e-14)[0]]
    ok, q, closure = certificate(instance, support, F, ebeta)
    if not F:
        return tau.copy(), 1.0, True, q, closure
    if not ok:
        return None, math.inf, False, q, closure
    idx = sorted(closure)
    g = np.zeros_like(tau)
    if idx:
        mats = [submatrix(instance.adjacency[i - 1], idx) for i in sorted(F)]
        g_r = neumann_apply(mats, tau[idx], ebeta)
        g[idx] = g_r
    return g, float(g.sum()), True, q, closure


def partition_value(instance, tau, beta, F):
    """c^F_{tau,beta}; divergence is reported as a value, never an error."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    F = frozenset(F)
    g, c, ok, q, closure = _gibbs_vector(instance, tau, beta, F)
    if not ok:
        return PartitionValue(math.inf, False, q, tuple(sorted(closure)))
    return PartitionValue(c, True, q, tuple(sorted(closure)))


def partition_partial_sums(instance, tau, beta, F, k_max):
    """Partial sums over shells |n| <= k, n in F; independent of the solver."""
    F = frozenset(F)
    tau = np.asarray(tau, dtype=float)
    if not F:
        return [1.0] * (k_max + 1)
    mats = [instance.adjacency[i - 1].astype(float) for i in sorted(F)]
    shells = shell_sums(mats, tau, k_max)
    ebeta = math.exp(beta)
    out, acc = [], 0.0
    for k, s in enumerate(shells):
        acc += ebeta ** (-k) * float(s.sum())
        out.append(acc)
    return out


@dataclass
class StateComponent:
    F: frozenset
    tau: np.ndarray
    weight: float
    c: float = 0.0
    gibbs: np.ndarray | None = field(default=None, repr=False)

    def pi_vector(self):
        """Values of the component state on the vertex projections."""
        return self.gibbs / self.c


@dataclass
class EquilibriumStateHandle:
    instance: object
    beta: float
    components: list

    def pi_trace(self):
        out = np.zeros(self.instance.dim_A)
        for comp in self.components:
            out += comp.weight * comp.pi_vector()
        return out

    def to_json_dict(self):
        return {
            "beta": float(self.beta),
            "components": [
                {
                    "F": sorted(c.F),
                    "tau": [float(x) for x in c.tau],
                    "w": float(c.weight),
                }
                for c in self.components
            ],
        }


def build_state(instance, beta, components, lattice=None, validate=True):
    """Assemble a state handle from (F, tau, weight) triples.

    Raises MembershipError when a trace fails its F-set membership and
    ConvergenceError when the summability certificate fails anyway.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    comps = []
    total = 0.0
    for F, tau, weight in components:
        F = frozenset(F)
        tau = np.asarray(tau, dtype=float)
        if weight < 0:
            raise ValueError("weights must be nonnegative")
        total += weight
        if validate and not is_member(instance, tau, beta, F, lattice):
            raise MembershipError(
                f"trace is not in the {fmt_subset(F)}-set at beta={beta}"
            )
        g, c, ok, _q, _cl = _gibbs_vector(instance, tau, beta, F)
        if not ok:
            raise ConvergenceError(
                f"partition series diverges for component {fmt_subset(F)}"
            )
        comps.append(StateComponent(F=F, tau=tau, weight=float(weight), c=c, gibbs=g))
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"component weights sum to {total}, expected 1")
    return EquilibriumStateHandle(instance=instance, beta=beta, components=comps)


def raw_state(instance, beta, components):
    """build_state without membership validation (negative controls, tests)."""
    return build_state(instance, beta, components, validate=False)


@dataclass(frozen=True)
class MonomialQuery:
    """pi(a) for a diagonal, or t(x_mu) t(x_nu)^* for basis paths."""

    kind: str  # "diag" | "monomial"
    a: tuple | None = None
    mu: object | None = None
    nu: object | None = None

    @staticmethod
    def diag(a):
        return MonomialQuery(kind="diag", a=tuple(float(x) for x in a))

    @staticmethod
    def monomial(mu, nu):
        return MonomialQuery(kind="monomial", mu=mu, nu=nu)


def evaluate_state(handle, query):
    """Closed-form value of the state on a query (or weighted query list)."""
    if isinstance(query, (list, tuple)):
        return sum(w * evaluate_state(handle, q) for w, q in query)
    instance = handle.instance
    if query.kind == "diag":
        a = np.asarray(query.a, dtype=float)
        if a.shape != (instance.dim_A,):
            raise PathError(f"diagonal query needs {instance.dim_A} entries")
        return float(handle.pi_trace() @ a)
    mu, nu = query.mu, query.nu
    alg = path_algebra(instance)
    if not alg.is_valid(mu) or not alg.is_valid(nu):
        raise PathError("query paths are not valid for this instance")
    if mu.degree != nu.degree:
        return 0.0  # gauge invariance: off-multidegree-diagonal vanishes
    if mu != nu:
        return 0.0  # distinct basis paths of one fiber are orthogonal
    src = source_vector(instance, mu).astype(float)
    scale = math.exp(-handle.beta * mu.length)
    total = 0.0
    for comp in handle.components:
        total += comp.weight * scale * float(comp.gibbs @ src) / comp.c
    return total


def state_on_QF(handle, F):
    """Mass the state gives the F-vacuum projection: weight_F / c^F."""
    F = frozenset(F)
    for comp in handle.components:
        if comp.F == F:
            return comp.weight / comp.c
    raise ValueError(f"handle has no {fmt_subset(F)} component")


# ---------------------------------------------------------------------------
# Wold decomposition


def _series_vector(instance, vec, beta, colors, want_vector):
    """sum_{n in colors} e^{-|n| beta} B^n vec, by certificate or partial sums.

    For genuine equilibrium inputs every shell is entrywise nonnegative (they
    are state values of positive operators); clearly negative shells abort.
    """
    colors = sorted(colors)
    vec = np.asarray(vec, dtype=float)
    if not colors:
        return vec.copy() if want_vector else float(vec.sum())
    support = [int(v) for v in np.nonzero(np.abs(vec) > 1e-12)[0]]
    if not support:
        return np.zeros_like(vec) if want_vector else 0.0
    ebeta = math.exp(beta)
    ok, _q, closure = certificate(instance, support, frozenset(colors), ebeta)
    if ok:
        idx = sorted(closure)
        mats = [submatrix(instance.adjacency[i - 1], idx) for i in colors]
        out = np.zeros_like(vec)
        out[idx] = neumann_apply(mats, vec[idx], ebeta)
        return out if want_vector else float(out.sum())
    # bounded partial sums; shells of genuine states are state values of
    # positive operators, so clearly negative shells mean a bad input
    mats = [instance.adjacency[i - 1].astype(float) for i in colors]
    kmax = 256
    while True:
        shells = shell_sums(mats, vec, kmax)
        total = np.zeros_like(vec)
        for k in range(kmax + 1):
            term = shells[k] / ebeta**k
            if float(term.sum()) < -MASS_CLAMP:
                raise NotKMSError(
                    "negative partition shell: input is not an equilibrium trace"
                )
            total += term
            if k > 0 and float(np.abs(term).sum()) < PARTIAL_INCREMENT_TOL:
                return total if want_vector else float(total.sum())
        if kmax >= PARTIAL_SHELL_CAP:
            raise NotKMSError(
                "partition series did not settle; input is not an equilibrium trace"
            )
        kmax = min(kmax * 4, PARTIAL_SHELL_CAP)


@dataclass
class WoldDecomposition:
    beta: float
    parts: dict  # frozenset F -> (mass, tau or None)
    infinite_mass: float
    infinite_trace: np.ndarray | None
    residual: float

    def to_json_dict(self, instance):
        N = instance.N
        out = {"beta": float(self.beta), "parts": {}, "residual": float(self.residual)}
        for F, (mass, tau) in sorted(self.parts.items(), key=lambda kv: sorted(kv[0])):
            key = "fty" if F == full_set(N) else fmt_subset(F)
            out["parts"][key] = {
                "mass": float(mass),
                "tau": None if tau is None else [float(x) for x in tau],
            }
        out["parts"]["inf"] = {
            "mass": float(self.infinite_mass),
            "tau": None
            if self.infinite_trace is None
            else [float(x) for x in self.infinite_trace],
        }
        return out


def _clamp_mass(x, what):
    if x < -MASS_CLAMP:
        raise NegativeMassError(f"{what} = {x:.3e} below clamp tolerance")
    return max(x, 0.0)


def wold_decompose(instance, beta, tau_total, tol=RESID_TOL):
    """Unique convex decomposition of an equilibrium trace into F-parts.

    ``tau_total`` must be the vertex restriction of a gauge-invariant
    equilibrium state at this beta; NotKMSError otherwise.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    tau_total = np.asarray(tau_total, dtype=float)
    if abs(tau_total.sum() - 1.0) > 1e-9 or tau_total.min() < -1e-12:
        raise NotKMSError("input is not a probability vector")
    ebeta = math.exp(beta)
    N = instance.N
    dim = instance.dim_A

    # tau^C = prod_{i in C} (I - e^-beta B_i) tau, cleaned of fp residue so the
    # exact eigen-cancellations of genuine inputs are honored
    tau_C = {}
    phi0 = {}
    for C in subsets(range(1, N + 1), include_empty=False):
        vec = tau_total.copy()
        for i in sorted(C):
            vec = vec - (instance.adjacency[i - 1].astype(float) @ vec) / ebeta
        vec[np.abs(vec) < 1e-12] = 0.0
        tau_C[C] = vec
        phi0[C] = _series_vector(instance, vec, beta, C, want_vector=False)

    parts = {}
    finite_vectors = {}
    for F in subsets(range(1, N + 1), include_empty=False):
        mass = 0.0
        wvec = np.zeros(dim)
        for C in supersets(F, N):
            sign = (-1) ** (len(C) - len(F))
            mass += sign * phi0[C]
            wvec += sign * _series_vector(
                instance, tau_C[C], beta, sorted(C - F), want_vector=True
            )
        mass = _clamp_mass(mass, f"mass of part {fmt_subset(F)}")
        if mass <= MASS_CLAMP:
            parts[F] = (0.0, None)
            continue
        wsum = float(wvec.sum())
        if wsum <= MASS_CLAMP:
            raise NotKMSError(f"part {fmt_subset(F)} has mass but no trace vector")
        tau_F = np.clip(wvec / wsum, 0.0, None)
        tau_F = tau_F / tau_F.sum()
        parts[F] = (mass, tau_F)
        g, c, ok, _q, _cl = _gibbs_vector(instance, tau_F, beta, F)
        if not ok:
            raise NotKMSError(
                f"recovered trace of part {fmt_subset(F)} has divergent series"
            )
        finite_vectors[F] = g / c

    finite_mass = sum(m for m, _ in parts.values())
    infinite_mass = _clamp_mass(1.0 - finite_mass, "infinite mass")
    recon = np.zeros(dim)
    for F, (mass, _tau) in parts.items():
        if mass > 0.0:
            recon += mass * finite_vectors[F]
    infinite_trace = None
    if infinite_mass > MASS_CLAMP:
        infinite_trace = (tau_total - recon) / infinite_mass
        infinite_trace[np.abs(infinite_trace) < 1e-12] = 0.0
        if infinite_trace.min() < -1e-9:
            raise NotKMSError("infinite part is not a positive trace")
        infinite_trace = np.clip(infinite_trace, 0.0, None)
        s = infinite_trace.sum()
        if abs(s - 1.0) > 1e-6:
            raise NotKMSError("infinite part does not normalize")
        infinite_trace = infinite_trace / s
        for i in range(1, N + 1):
            resid = np.max(
                np.abs(
                    instance.adjacency[i - 1].astype(float) @ infinite_trace
                    - ebeta * infinite_trace
                )
            )
            if resid > 1e-7 * max(1.0, ebeta):
                raise NotKMSError(
                    f"infinite part violates the color-{i} averaging condition"
                )
        recon = recon + infinite_mass * infinite_trace
    residual = float(np.max(np.abs(recon - tau_total)))
    if residual > tol:
        raise NotKMSError(
            f"reconstruction residual {residual:.3e} exceeds {tol:.1e}; "
            "input is not an equilibrium trace at this beta"
        )
    return WoldDecomposition(
        beta=beta,
        parts=parts,
        infinite_mass=infinite_mass,
        infinite_trace=infinite_trace,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# ground / KMS-infinity states


@dataclass
class GroundStateDescription:
    """The ground simplex: all states of A, filtered by the top lattice ideal.

    For commutative A states and traces coincide, so the ground and limit
    simplices agree here; both are the probability simplex on the vertices
    outside the filter.
    """

    vertices: list  # admissible vertex labels
    filtered: list  # labels annihilated by the filter
    extreme_points: list

    def to_json_dict(self):
        return {
            "vertices": self.vertices,
            "filtered": self.filtered,
            "extreme_points": [[float(x) for x in p] for p in self.extreme_points],
            "dim": len(self.vertices) - 1 if self.vertices else -1,
        }


def ground_states(instance, lattice=None):
    dim = instance.dim_A
    zero = set()
    if lattice is not None:
        zero = set(lattice.get(full_set(instance.N)).vertices)
    keep = [v for v in range(dim) if v not in zero]
    pts = []
    for v in keep:
        e = np.zeros(dim)
        e[v] = 1.0
        pts.append(e)
    return GroundStateDescription(
        vertices=[instance.label(v) for v in keep],
        filtered=sorted(instance.label(v) for v in zero),
        extreme_points=pts,
    )
