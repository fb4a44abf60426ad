"""Multi-index and color-subset helpers used across the package.

Colors are 1-based integers; a color subset F is a frozenset of them.
Multi-indices are tuples of nonnegative ints of length N.
"""

from itertools import combinations

import numpy as np


def full_set(N):
    return frozenset(range(1, N + 1))


def subsets(colors, include_empty=True):
    """All subsets of an iterable of colors, as frozensets, smallest first."""
    colors = sorted(colors)
    lo = 0 if include_empty else 1
    for r in range(lo, len(colors) + 1):
        for combo in combinations(colors, r):
            yield frozenset(combo)


def supersets(F, N):
    """All C with F <= C <= {1..N}."""
    rest = sorted(full_set(N) - F)
    for r in range(len(rest) + 1):
        for combo in combinations(rest, r):
            yield F | frozenset(combo)


def fmt_subset(F):
    """Render a color subset as '{1,2}' ('{}' for the empty set)."""
    return "{" + ",".join(str(i) for i in sorted(F)) + "}"


def parse_subset(text):
    """Parse '{1,2}', '1,2' or '' into a frozenset of colors."""
    body = text.strip().strip("{}").strip()
    if not body:
        return frozenset()
    return frozenset(int(p) for p in body.split(","))


def bitmask(F):
    return sum(1 << (i - 1) for i in F)


def compositions(total, parts):
    """All tuples of `parts` nonnegative ints summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def multi_indices_box(bound, colors, N):
    """All n in Z+^N with supp(n) ⊆ colors and n_i <= bound for i in colors."""
    cols = sorted(colors)
    if not cols:
        yield (0,) * N
        return

    def rec(pos, acc):
        if pos == len(cols):
            n = [0] * N
            for c, v in zip(cols, acc):
                n[c - 1] = v
            yield tuple(n)
            return
        for v in range(bound + 1):
            yield from rec(pos + 1, acc + [v])

    yield from rec(0, [])


def index_length(n):
    return int(sum(n))


def restrict_index(n, F):
    """n_F: zero out coordinates outside F."""
    return tuple(ni if (i + 1) in F else 0 for i, ni in enumerate(n))


def shell_sums(mats, vec, kmax):
    """Shell sums S_k = sum_{|n|=k} (prod_i mats[i]^{n_i}) @ vec for k=0..kmax.

    The sum runs over multi-indices supported on the given matrix list; no
    multinomial weights.  Matrices need not commute for the definition, but
    callers here always pass commuting families.
    """
    vec = np.asarray(vec, dtype=float)
    shells = [np.zeros_like(vec) for _ in range(kmax + 1)]
    shells[0] = vec.copy()
    for M in mats:
        M = np.asarray(M, dtype=float)
        new = [np.zeros_like(vec) for _ in range(kmax + 1)]
        for base in range(kmax + 1):
            w = shells[base].copy()
            new[base] += w
            for k in range(base + 1, kmax + 1):
                w = M @ w
                new[k] += w
        shells = new
    return shells


def neumann_apply(mats, vec, ebeta):
    """Apply prod_i (I - mats[i]/ebeta)^{-1} to vec by sequential solves.

    Caller must ensure each factor is invertible (spectral certificate).
    """
    out = np.asarray(vec, dtype=float).copy()
    for M in mats:
        M = np.asarray(M, dtype=float)
        A = np.eye(M.shape[0]) - M / ebeta
        out = np.linalg.solve(A, out)
    return out
