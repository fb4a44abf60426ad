"""Growth exponents of block multidegree sums and the existence threshold.

All rates are natural logarithms of spectral radii of the (commuting,
nonnegative) transfer matrices, restricted to reachable blocks where a trace
enters.  Directions with spectral radius zero carry no rate at all; they are
reported as None ("empty direction") rather than as a number.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedError
from .linalg import forward_closure, spectral_radius, submatrix
from .model import mfl_allowable_words
from .util import full_set, shell_sums, subsets

SLOPE_CONVERGENCE_TOL = 5e-2


@dataclass
class EntropyReport:
    per_color: dict  # i -> log rho(M_i) or None
    per_subset: dict  # frozenset -> value or None
    strong: float | None
    strong_per_subset: dict
    system: float
    attaining_vertex: str | None
    tracial: dict = field(default_factory=dict)  # name -> value
    method: str = "spectral"
    slope_k: int | None = None

    def to_json_dict(self):
        def enc(v):
            if v is None or math.isinf(v):
                return None
            return float(v)

        return {
            "per_color": {str(i): enc(v) for i, v in sorted(self.per_color.items())},
            "per_subset": {
                "{" + ",".join(map(str, sorted(F))) + "}": enc(v)
                for F, v in sorted(self.per_subset.items(), key=lambda kv: sorted(kv[0]))
            },
            "h_s": enc(self.strong),
            "h_s_per_subset": {
                "{" + ",".join(map(str, sorted(F))) + "}": enc(v)
                for F, v in sorted(
                    self.strong_per_subset.items(), key=lambda kv: sorted(kv[0])
                )
            },
            "h_X": float(self.system),
            "attaining_vertex": self.attaining_vertex,
            "tracial": {k: enc(v) for k, v in self.tracial.items()},
            "method": self.method,
            "slope_k": self.slope_k,
        }


def _color_rates(instance):
    rates = {}
    for i in range(1, instance.N + 1):
        rho = spectral_radius(instance.adjacency[i - 1])
        rates[i] = None if rho <= 0.0 else math.log(rho)
    return rates


def fiber_entropy(instance, F):
    """max_{i in F} log rho(M_i); None when every direction in F is empty."""
    F = frozenset(F)
    if not F:
        return 0.0
    if instance.has_algebra:
        rates = _color_rates(instance)
        vals = [rates[i] for i in sorted(F) if rates[i] is not None]
        return max(vals) if vals else None
    if instance.kind == "mfl":
        est, _slopes, _conv = mfl_entropy(instance.spec, F, k_max=30)
        return est
    raise UnsupportedError("fiber entropy unavailable for this instance")


def strong_entropy(instance, F=None):
    """Equals the fiber entropy: the infimum collapses for commutative A."""
    F = full_set(instance.N) if F is None else frozenset(F)
    return fiber_entropy(instance, F)


def _support_rate(instance, support, F):
    """max_{i in F} log rho(B_i restricted to the F-closure of the support)."""
    if not F:
        return 0.0
    Ms = [instance.transfer(i) for i in sorted(F)]
    closure = sorted(forward_closure(Ms, support))
    vals = []
    for i in sorted(F):
        rho = spectral_radius(submatrix(instance.adjacency[i - 1], closure))
        if rho > 0.0:
            vals.append(math.log(rho))
    return max(vals) if vals else None


def tracial_entropy(instance, tau, F=None):
    """Growth exponent of the F-block sums weighted by the trace tau.

    Depends on tau only through its support; equals the max color rate on the
    forward closure of that support under the colors of F.
    """
    F = full_set(instance.N) if F is None else frozenset(F)
    if not F:
        return 0.0
    tau = np.asarray(tau, dtype=float)
    support = [int(v) for v in np.nonzero(tau > 1e-14)[0]]
    rate = _support_rate(instance, support, F)
    return rate if rate is not None else float("-inf")


def system_entropy(instance):
    """max(0, min over vertices of the per-vertex tracial entropy).

    Returns (h_X, attaining_vertex_label or None).
    """
    F = full_set(instance.N)
    best, best_v = None, None
    for v in range(instance.dim_A):
        rate = _support_rate(instance, [v], F)
        val = float("-inf") if rate is None else rate
        if best is None or val < best:
            best, best_v = val, v
    hx = max(0.0, best if best is not None else 0.0)
    attaining = instance.label(best_v) if hx > 0.0 and best_v is not None else None
    return hx, attaining


def block_sum_norms(instance, F, k_max):
    """Sup norms of S_k = sum_{|n|=k, n in F} Phi_n(1) for k = 0..k_max."""
    ones = np.ones(instance.dim_A)
    Ms = [instance.transfer(i) for i in sorted(F)]
    shells = shell_sums(Ms, ones, k_max)
    return [float(np.max(s)) if s.size else 0.0 for s in shells]


def fiber_entropy_slope(instance, F, k=30):
    """Finite-k slope log(||S_k|| / ||S_{k-1}||); cross-check for the closed form.

    The discrete derivative of the log-norms converges like O(1/k), unlike
    (1/k) log ||S_k|| whose polynomial prefactor decays only as log(k)/k.
    """
    norms = block_sum_norms(instance, F, k)
    if norms[k] <= 0.0 or norms[k - 1] <= 0.0:
        return None
    return math.log(norms[k] / norms[k - 1])


def entropy_report(instance, traces=None):
    """Full entropy report; `traces` maps names to probability vectors."""
    per_color = _color_rates(instance)
    per_subset = {}
    strong_per_subset = {}
    if instance.N <= 8:
        wanted = list(subsets(range(1, instance.N + 1), include_empty=True))
    else:
        wanted = [frozenset(), full_set(instance.N)] + [
            frozenset([i]) for i in range(1, instance.N + 1)
        ]
    for F in wanted:
        per_subset[F] = fiber_entropy(instance, F)
        strong_per_subset[F] = per_subset[F]
    strong = per_subset[full_set(instance.N)]
    hx, attaining = system_entropy(instance)
    report = EntropyReport(
        per_color=per_color,
        per_subset=per_subset,
        strong=strong,
        strong_per_subset=strong_per_subset,
        system=hx,
        attaining_vertex=attaining,
    )
    for name, tau in (traces or {}).items():
        report.tracial[name] = tracial_entropy(instance, tau)
    return report


def mfl_entropy(spec, F=None, k_max=20, node_budget=5_000_000):
    """Slope estimates (1/k) log |B_k^F| for an allowable-word language.

    Returns (estimate_at_k_max, slope_table, converged) where slope_table is
    a list of (k, count, slope) rows; slope is None when the count vanishes.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    from .model import _mfl_spec_of

    spec = _mfl_spec_of(spec)
    F = full_set(spec.N) if F is None else frozenset(F)
    table = []
    for k in range(1, k_max + 1):
        count = mfl_allowable_words(spec, k, F)
        slope = math.log(count) / k if count > 0 else None
        table.append((k, count, slope))
    est = table[-1][2]
    prev = table[-2][2]
    converged = (
        est is not None
        and prev is not None
        and abs(est - prev) <= SLOPE_CONVERGENCE_TOL
    )
    return est, table, converged
