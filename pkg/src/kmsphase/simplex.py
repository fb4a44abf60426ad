"""Admissible trace polytopes per color subset and the beta-phase diagram.

For a proper subset F the trace set is cut out by the eigen-conditions
``B_i tau = e^beta tau`` for every color i outside F, the probability simplex,
coordinate filters from the quotient kernels, and a summability certificate:
every color of F must have spectral radius strictly below ``e^beta`` on the
forward closure of the support.  The certificate depends on the support only
and is monotone, so the admissible set is a union of faces; its extreme
points are admissible vertices of the eigen-polytope.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DimensionCap, EigenSnapAmbiguity
from .linalg import forward_closure, nullspace, spectral_radius, submatrix
from .model import compute_fI, zero_lattice
from .util import fmt_subset, full_set, subsets

SNAP_TOL = 1e-9
RESID_TOL = 1e-9
CERT_MARGIN = 1e-12
VERTEX_DIM_CAP = 32


@dataclass
class TraceSimplexResult:
    beta: float
    F: frozenset
    extreme_points: list
    affine_dim: int
    empty: bool
    filters: dict
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "beta": float(self.beta),
            "F": sorted(self.F),
            "extreme_points": [[float(x) for x in p] for p in self.extreme_points],
            "dim": int(self.affine_dim),
            "empty": bool(self.empty),
            "filters": self.filters,
            "diagnostics": self.diagnostics,
        }


def _empty_result(beta, F, filters, diagnostics):
    return TraceSimplexResult(
        beta=beta,
        F=frozenset(F),
        extreme_points=[],
        affine_dim=-1,
        empty=True,
        filters=filters,
        diagnostics=diagnostics,
    )


def _snap_eigenvalue(B, ebeta, snap_tol):
    """Eigenvalue of B matched to e^beta, None when nothing is in the window."""
    vals = np.linalg.eigvals(np.asarray(B, dtype=float))
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    reals = sorted(float(v.real) for v in vals if abs(v.imag) <= 1e-9 * scale)
    # cluster numerically equal eigenvalues
    clusters = []
    for v in reals:
        if clusters and abs(v - clusters[-1][-1]) <= 1e-12 * scale:
            clusters[-1].append(v)
        else:
            clusters.append([v])
    centers = [sum(c) / len(c) for c in clusters]
    matched = [c for c in centers if abs(ebeta - c) <= snap_tol * max(1.0, abs(c))]
    if not matched:
        return None
    if len(matched) > 1:
        raise EigenSnapAmbiguity(
            f"e^beta={ebeta} is within snap tolerance of eigenvalues {matched}"
        )
    return matched[0]


def certificate(instance, support, F, ebeta, margin=CERT_MARGIN):
    """Summability certificate for c^F on the closure of a support.

    Returns (ok, q, closure) with q = max over colors of F of the spectral
    radius of B_i on the forward closure, divided by e^beta.  Empty F is
    always certified (the series is the single n = 0 term).
    """
    F = frozenset(F)
    support = sorted(set(int(v) for v in support))
    if not F or not support:
        return True, 0.0, frozenset(support)
    Ms = [instance.transfer(i) for i in sorted(F)]
    closure = forward_closure(Ms, support)
    idx = sorted(closure)
    q = 0.0
    for i in sorted(F):
        rho = spectral_radius(submatrix(instance.adjacency[i - 1], idx))
        q = max(q, rho / ebeta)
    return q < 1.0 - margin, q, closure


def _filter_vertices(instance, F, lattice):
    """Coordinates forced to zero: fI_{F^c} plus the lattice ideal at F."""
    N = instance.N
    Fc = full_set(N) - frozenset(F)
    zero = set()
    f_ideal = compute_fI(instance, Fc) if Fc else None
    if f_ideal:
        zero |= set(f_ideal.vertices)
    lat_ideal = None
    if lattice is not None and F:
        lat_ideal = lattice.get(F)
        zero |= set(lat_ideal.vertices)
    filters = {
        "fI": sorted(instance.label(v) for v in (f_ideal.vertices if f_ideal else ())),
        "I": sorted(instance.label(v) for v in (lat_ideal.vertices if lat_ideal else ())),
    }
    return zero, filters


def _affine_vertices(kernel, dim, feas_tol=1e-10):
    """Vertices of {tau in span(kernel) : tau >= 0, sum tau = 1}."""
    k = kernel.shape[1]
    if k == 0:
        return []
    s = kernel.T @ np.ones(dim)
    if np.linalg.norm(s) <= 1e-12:
        return []
    y0 = s / (s @ s)
    tau0 = kernel @ y0
    # directions: kernel image of the orthogonal complement of s
    P = np.eye(k) - np.outer(s, s) / (s @ s)
    u, sv, _vt = np.linalg.svd(P)
    keep = [j for j in range(k) if sv[j] > 0.5]  # projector spectrum is 0/1
    W = kernel @ u[:, keep] if keep else np.zeros((dim, 0))
    t = W.shape[1]
    if t > 8:
        raise DimensionCap(f"solution set dimension {t} too large to enumerate")
    candidates = []
    if t == 0:
        candidates.append(tau0)
    else:
        for T in combinations(range(dim), t):
            A = W[list(T), :]
            b = -tau0[list(T)]
            try:
                y = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(y)):
                continue
            candidates.append(tau0 + W @ y)
    out, seen = [], set()
    for tau in candidates:
        if np.min(tau) < -feas_tol:
            continue
        tau = np.clip(tau, 0.0, None)
        total = tau.sum()
        if total <= 1e-9:
            continue
        tau = tau / total
        key = tuple(np.round(tau / 1e-9).astype(np.int64))
        if key not in seen:
            seen.add(key)
            out.append(tau)
    return out


def _eigen_kernel(instance, colors, ebeta, zero_coords, snap_tol):
    """Joint eigenspace basis for B_i tau = e^beta tau over the given colors."""
    dim = instance.dim_A
    rows = []
    matched = {}
    for i in sorted(colors):
        lam = _snap_eigenvalue(instance.adjacency[i - 1], ebeta, snap_tol)
        matched[i] = lam
        if lam is None:
            return np.zeros((dim, 0)), matched
        rows.append(instance.adjacency[i - 1].astype(float) - lam * np.eye(dim))
    for v in sorted(zero_coords):
        e = np.zeros((1, dim))
        e[0, v] = 1.0
        rows.append(e)
    if not rows:
        return np.eye(dim), matched
    stacked = np.vstack(rows)
    return nullspace(stacked, rtol=1e-11, atol=snap_tol * 1e-2), matched


def f_trace_set(instance, beta, F, lattice=None, snap_tol=SNAP_TOL, resid_tol=RESID_TOL):
    """Admissible traces for a proper color subset F (empty F = averaging)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    F = frozenset(F)
    N = instance.N
    if F == full_set(N):
        return finite_trace_set(instance, beta, lattice)
    if instance.dim_A > VERTEX_DIM_CAP:
        raise DimensionCap(f"vertex enumeration capped at dim {VERTEX_DIM_CAP}")
    ebeta = math.exp(beta)
    zero, filters = _filter_vertices(instance, F, lattice)
    kernel, matched = _eigen_kernel(instance, full_set(N) - F, ebeta, zero, snap_tol)
    diagnostics = {
        "ebeta": ebeta,
        "matched_eigenvalues": {str(i): v for i, v in matched.items()},
    }
    if kernel.shape[1] == 0:
        return _empty_result(beta, F, filters, diagnostics)
    vertices = _affine_vertices(kernel, instance.dim_A)
    # verify residuals against e^beta itself, then apply the certificate
    admissible, supports = [], []
    for tau in vertices:
        bad = False
        for i in sorted(full_set(N) - F):
            resid = np.max(
                np.abs(instance.adjacency[i - 1].astype(float) @ tau - ebeta * tau)
            )
            if resid > resid_tol * max(1.0, ebeta):
                bad = True
                break
        if bad or any(tau[v] > resid_tol for v in zero):
            continue
        support = [int(v) for v in np.nonzero(tau > 1e-12)[0]]
        ok, q, _closure = certificate(instance, support, F, ebeta)
        if ok:
            admissible.append(tau)
            supports.append(support)
    if not admissible:
        return _empty_result(beta, F, filters, diagnostics)
    union = sorted(set().union(*[set(s) for s in supports]))
    ok_union, q_union, _ = certificate(instance, union, F, ebeta)
    pts = [p for p in admissible]
    diffs = np.array([p - pts[0] for p in pts[1:]])
    affine_dim = int(np.linalg.matrix_rank(diffs, tol=1e-9)) if len(pts) > 1 else 0
    diagnostics.update(
        {
            "certificate_rho": q_union,
            "convex": bool(ok_union),
            "admissible_supports": [
                sorted(instance.label(v) for v in s) for s in supports
            ],
        }
    )
    return TraceSimplexResult(
        beta=beta,
        F=F,
        extreme_points=pts,
        affine_dim=affine_dim,
        empty=False,
        filters=filters,
        diagnostics=diagnostics,
    )


def avt_traces(instance, beta, lattice=None, snap_tol=SNAP_TOL, resid_tol=RESID_TOL):
    """Averaging traces: eigen-conditions in every color, no summability cut."""
    return f_trace_set(instance, beta, frozenset(), lattice, snap_tol, resid_tol)


def finite_trace_set(instance, beta, lattice=None):
    """Traces with summable full partition series: one face of the simplex.

    Admissible supports are closed under unions (forward closures of closed
    sets stay closed), so there is a unique largest admissible support; the
    result is the face it spans.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    ebeta = math.exp(beta)
    N = instance.N
    F = full_set(N)
    zero = set()
    lat_labels = []
    if lattice is not None:
        ideal = lattice.get(F)
        zero = set(ideal.vertices)
        lat_labels = sorted(instance.label(v) for v in ideal.vertices)
    filters = {"fI": [], "I": lat_labels}
    admissible = []
    for v in range(instance.dim_A):
        if v in zero:
            continue
        ok, _q, _cl = certificate(instance, [v], F, ebeta)
        if ok:
            admissible.append(v)
    diagnostics = {"ebeta": ebeta, "admissible_vertices": [instance.label(v) for v in admissible]}
    if not admissible:
        return _empty_result(beta, F, filters, diagnostics)
    _ok, q, _cl = certificate(instance, admissible, F, ebeta)
    diagnostics["certificate_rho"] = q
    diagnostics["convex"] = True
    diagnostics["admissible_supports"] = [[instance.label(v) for v in admissible]]
    pts = []
    for v in admissible:
        e = np.zeros(instance.dim_A)
        e[v] = 1.0
        pts.append(e)
    return TraceSimplexResult(
        beta=beta,
        F=F,
        extreme_points=pts,
        affine_dim=len(admissible) - 1,
        empty=False,
        filters=filters,
        diagnostics=diagnostics,
    )


def is_member(instance, tau, beta, F, lattice=None, tol=RESID_TOL):
    """Membership test for the F-trace set at beta."""
    tau = np.asarray(tau, dtype=float)
    F = frozenset(F)
    N = instance.N
    ebeta = math.exp(beta)
    if np.min(tau) < -tol or abs(tau.sum() - 1.0) > max(tol, 1e-12):
        return False
    if F == full_set(N):
        zero = set(lattice.get(F).vertices) if lattice else set()
    else:
        zero, _ = _filter_vertices(instance, F, lattice)
    if any(tau[v] > tol for v in zero):
        return False
    for i in sorted(full_set(N) - F):
        resid = np.max(np.abs(instance.adjacency[i - 1].astype(float) @ tau - ebeta * tau))
        if resid > tol * max(1.0, ebeta):
            return False
    if F:
        support = [int(v) for v in np.nonzero(tau > 1e-12)[0]]
        ok, _q, _cl = certificate(instance, support, F, ebeta)
        if not ok:
            return False
    return True


def full_simplex(instance, beta, lattice=None, snap_tol=SNAP_TOL):
    """All F-parts at one beta, with the pairwise disjointness check."""
    results = {}
    for F in subsets(range(1, instance.N + 1), include_empty=True):
        if F == full_set(instance.N):
            results[F] = finite_trace_set(instance, beta, lattice)
        else:
            results[F] = f_trace_set(instance, beta, F, lattice, snap_tol)
    pairs = [(F, r) for F, r in results.items() if not r.empty]
    for a in range(len(pairs)):
        for b in range(len(pairs)):
            if a == b:
                continue
            Fa, ra = pairs[a]
            Fb, _rb = pairs[b]
            for tau in ra.extreme_points:
                if is_member(instance, tau, beta, Fb, lattice):
                    raise AssertionError(
                        f"trace sets {fmt_subset(Fa)} and {fmt_subset(Fb)} intersect"
                    )
    return results


@dataclass
class PhaseDiagram:
    betas: list
    rows: list  # per beta: {F: (nonempty, dim)}
    critical: dict
    labels: list

    def to_json_dict(self):
        return {
            "betas": [float(b) for b in self.betas],
            "critical": {k: float(v) for k, v in self.critical.items()},
            "rows": [
                {
                    fmt_subset(F): {"nonempty": ne, "dim": d}
                    for F, (ne, d) in sorted(row.items(), key=lambda kv: sorted(kv[0]))
                }
                for row in self.rows
            ],
            "labels": self.labels,
        }

    def csv_rows(self):
        """(beta, F bitmask, dim) for every nonempty part."""
        out = []
        for beta, row in zip(self.betas, self.rows):
            for F, (ne, d) in sorted(row.items(), key=lambda kv: sorted(kv[0])):
                if ne:
                    mask = sum(1 << (i - 1) for i in F)
                    out.append((beta, mask, d))
        return out


def phase_diagram(instance, beta_min, beta_max, steps, lattice=None, jobs=1):
    """Scan full_simplex over a grid augmented with the exact critical points."""
    if not 0 < beta_min < beta_max:
        raise ValueError("need 0 < beta_min < beta_max")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    from .entropy import _color_rates, strong_entropy, system_entropy

    critical = {}
    rates = _color_rates(instance)
    for i, r in rates.items():
        if r is not None:
            critical[f"log_rho_{i}"] = r
    hs = strong_entropy(instance)
    if hs is not None:
        critical["h_s"] = hs
    hx, _ = system_entropy(instance)
    critical["h_X"] = hx
    grid = set(float(b) for b in np.linspace(beta_min, beta_max, steps))
    for v in critical.values():
        if beta_min <= v <= beta_max and v > 0:
            grid.add(float(v))
    betas = sorted(grid)

    def work(beta):
        res = full_simplex(instance, beta, lattice)
        return {F: (not r.empty, r.affine_dim) for F, r in res.items()}

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, betas))
    else:
        rows = [work(b) for b in betas]

    labels = []
    for row in rows:
        nonempty = [F for F, (ne, _d) in row.items() if ne]
        if not nonempty:
            labels.append("empty")
        elif len(nonempty) == 1:
            F = nonempty[0]
            labels.append("fty" if F == full_set(instance.N) else fmt_subset(F))
        else:
            labels.append(
                "coexistence:" + "+".join(fmt_subset(F) for F in sorted(nonempty, key=sorted))
            )
    return PhaseDiagram(betas=betas, rows=rows, critical=critical, labels=labels)
