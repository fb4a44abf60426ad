"""Small linear-algebra kernel: spectral radii, reachability, exact powers."""

import numpy as np

DENSE_EIG_LIMIT = 64
POWER_TOL = 1e-12
POWER_MAXITER = 100_000


def spectral_radius(M, tol=POWER_TOL, maxiter=POWER_MAXITER):
    """Spectral radius of a square nonnegative matrix.

    Dense eigensolver up to DENSE_EIG_LIMIT; above that a shifted power
    iteration (M + I is aperiodic on every class, so the iteration settles).
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n == 0:
        return 0.0
    if n <= DENSE_EIG_LIMIT:
        return float(max(abs(np.linalg.eigvals(M))))
    v = np.ones(n) / n
    shifted = M + np.eye(n)
    lam = 1.0
    for _ in range(maxiter):
        w = shifted @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_lam = nw / np.linalg.norm(v)
        v = w / nw
        if abs(new_lam - lam) <= tol * max(1.0, abs(lam)):
            lam = new_lam
            break
        lam = new_lam
    return max(lam - 1.0, 0.0)


def real_eigenvalues(M, imag_tol=1e-9):
    """Real eigenvalues of M (those with negligible imaginary part)."""
    vals = np.linalg.eigvals(np.asarray(M, dtype=float))
    scale = max(1.0, float(np.max(np.abs(vals))) if len(vals) else 1.0)
    return sorted(float(v.real) for v in vals if abs(v.imag) <= imag_tol * scale)


def forward_closure(transfer_mats, support):
    """Smallest superset of `support` closed under v -> {w : M_i[v, w] != 0}.

    With M_i the transfer matrix (adjacency transpose), row v of M_i lists the
    targets of edges leaving v, so this is forward reachability in the graph.
    """
    todo = sorted(set(int(v) for v in support))
    seen = set(todo)
    while todo:
        v = todo.pop()
        for M in transfer_mats:
            for w in np.nonzero(np.asarray(M)[v])[0]:
                w = int(w)
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
    return frozenset(seen)


def submatrix(M, idx):
    idx = sorted(idx)
    return np.asarray(M)[np.ix_(idx, idx)]


def nullspace(A, rtol=1e-9, atol=0.0):
    """Orthonormal basis (columns) of the nullspace of A, via SVD."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.eye(A.shape[1])
    u, s, vt = np.linalg.svd(A)
    smax = s[0] if len(s) else 0.0
    tol = max(rtol * max(1.0, smax), atol)
    rank = int(np.sum(s > tol))
    return vt[rank:].T.copy()


def exact_int_matmul_chain(mats_int, powers):
    """prod_i mats[i]**powers[i] in exact Python-int arithmetic.

    Returns (array, overflowed) where array is int64 if every entry fits and
    float64 with overflowed=True otherwise.
    """
    dim = mats_int[0].shape[0]
    acc = [[1 if r == c else 0 for c in range(dim)] for r in range(dim)]

    def mul(A, B):
        return [
            [sum(A[r][k] * B[k][c] for k in range(dim)) for c in range(dim)]
            for r in range(dim)
        ]

    for M, p in zip(mats_int, powers):
        base = [[int(x) for x in row] for row in np.asarray(M)]
        e = int(p)
        # square-and-multiply keeps intermediate blowup modest
        while e > 0:
            if e & 1:
                acc = mul(acc, base)
            e >>= 1
            if e:
                base = mul(base, base)
    top = max((abs(x) for row in acc for x in row), default=0)
    if top < 2**63:
        return np.array(acc, dtype=np.int64), False
    return np.array([[float(x) for x in row] for row in acc], dtype=float), True
