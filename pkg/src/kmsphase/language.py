"""Multivariable factorial languages: enumeration and the follower-set algebra.

A language instance is given by per-color symbol counts and a finite set of
forbidden multiwords; a multiword is allowable when no forbidden multiword is
a coordinatewise contiguous factor of it.  The commutative coefficient algebra
is spanned by the follower-set projections; we realize it concretely by
building the deterministic follower automaton (states = Nerode classes of
right extensions), then enumerating realized acceptance profiles, which are
the minimal projections ("vertices") of the algebra.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, LanguageError

DEFAULT_ALGEBRA_CAP = 4096


def normalize_forbidden(N, forbidden):
    """Canonicalize forbidden words to tuples of per-color symbol tuples."""
    out = []
    for item in forbidden:
        if len(item) != N:
            raise LanguageError(
                f"forbidden word {item!r} must have {N} per-color components"
            )
        word = tuple(tuple(int(s) for s in part) for part in item)
        if all(len(part) == 0 for part in word):
            raise LanguageError("forbidden word with all components empty")
        out.append(word)
    # dedupe, stable order
    seen, uniq = set(), []
    for w in out:
        if w not in seen:
            seen.add(w)
            uniq.append(w)
    return tuple(uniq)


def _is_factor(needle, haystack):
    n, h = len(needle), len(haystack)
    if n == 0:
        return True
    return any(haystack[i : i + n] == needle for i in range(h - n + 1))


def word_allowable(multiword, forbidden):
    """True when no forbidden multiword is a coordinatewise factor."""
    for omega in forbidden:
        if all(_is_factor(w, m) for w, m in zip(omega, multiword)):
            return False
    return True


def empty_word(N):
    return tuple(() for _ in range(N))


def append_symbol(multiword, color, symbol):
    parts = list(multiword)
    parts[color - 1] = parts[color - 1] + (symbol,)
    return tuple(parts)


def concat(left, right):
    return tuple(l + r for l, r in zip(left, right))


def multidegree(multiword):
    return tuple(len(p) for p in multiword)


def count_words(N, d, forbidden, k, F, collect=None, node_budget=5_000_000):
    """Count |{mu allowable : supp(mu) ⊆ F, |mu| = k}| by pruned DFS.

    `collect`, if given, is a list receiving the words themselves.  The DFS
    fills colors in ascending order, one symbol at a time.  A branch dies
    exactly when some forbidden word completes, i.e. one coordinate piece
    ends at the symbol just appended while every other piece is already a
    factor of its (possibly still empty) coordinate.
    """
    cols = sorted(F)
    if not cols:
        return 1 if k == 0 else 0
    visited = 0

    def completes_forbidden(word, color):
        tail = word[color - 1]
        for omega in forbidden:
            part = omega[color - 1]
            if not part or len(part) > len(tail) or tail[-len(part):] != part:
                continue
            if all(
                _is_factor(omega[j], word[j]) for j in range(N) if j != color - 1
            ):
                return True
        return False

    def rec(word, col_pos, remaining):
        if col_pos == len(cols):
            if remaining:
                return 0
            if collect is not None:
                collect.append(word)
            return 1
        color = cols[col_pos]

        def grow(w, used):
            nonlocal visited
            visited += 1
            if visited > node_budget:
                raise CapExceeded("word enumeration exceeded node budget")
            total = rec(w, col_pos + 1, remaining - used)
            if used < remaining:
                for s in range(1, d[color - 1] + 1):
                    w2 = append_symbol(w, color, s)
                    if not completes_forbidden(w2, color):
                        total += grow(w2, used + 1)
            return total

        return grow(word, 0)

    return rec(empty_word(N), 0, k)


@dataclass
class FollowerAutomaton:
    """Deterministic automaton of right-extension classes (minimized)."""

    N: int
    d: tuple
    forbidden: tuple
    alphabet: tuple  # ordered (color, symbol) pairs
    n_states: int
    start: int
    trans: dict  # (state, (color, symbol)) -> state or None

    def run(self, state, multiword):
        """Consume a multiword (any interleaving is equivalent); None if dead."""
        symbols = []
        for c, part in enumerate(multiword, start=1):
            symbols.extend((c, s) for s in part)
        for sym in symbols:
            if state is None:
                return None
            state = self.trans.get((state, sym))
        return state

    def state_of(self, multiword):
        return self.run(self.start, multiword)


def build_follower_automaton(N, d, forbidden, cap=DEFAULT_ALGEBRA_CAP):
    """BFS the raw (suffix, occurrence-bits) states, then Moore-minimize."""
    windows = [0] * N
    for omega in forbidden:
        for i in range(N):
            windows[i] = max(windows[i], len(omega[i]) - 1)
    multi = [
        idx
        for idx, omega in enumerate(forbidden)
        if sum(1 for part in omega if part) >= 2
    ]
    alphabet = tuple((c, s) for c in range(1, N + 1) for s in range(1, d[c - 1] + 1))

    def step(state, sym):
        suffixes, bits = state
        color, symbol = sym
        i = color - 1
        grown = suffixes[i] + (symbol,)
        new_bits = set(bits)
        for idx, omega in enumerate(forbidden):
            part = omega[i]
            if not part or len(part) > len(grown):
                continue
            if grown[-len(part) :] != part:
                continue
            if idx in multi:
                new_bits.add((idx, color))
            else:
                return None  # single-coordinate forbidden word completed
        for idx in multi:
            omega = forbidden[idx]
            if all(
                (not omega[j]) or ((idx, j + 1) in new_bits) for j in range(N)
            ):
                return None
        trimmed = list(suffixes)
        trimmed[i] = grown[-windows[i] :] if windows[i] else ()
        return (tuple(trimmed), frozenset(new_bits))

    start = (tuple(() for _ in range(N)), frozenset())
    states = {start: 0}
    order = [start]
    raw_trans = {}
    pos = 0
    while pos < len(order):
        st = order[pos]
        pos += 1
        for sym in alphabet:
            nxt = step(st, sym)
            if nxt is None:
                raw_trans[(states[st], sym)] = None
                continue
            if nxt not in states:
                if len(states) >= cap:
                    raise CapExceeded(
                        f"follower automaton exceeded {cap} states"
                    )
                states[nxt] = len(states)
                order.append(nxt)
            raw_trans[(states[st], sym)] = states[nxt]

    # Moore partition refinement; DEAD is its own block
    n = len(states)
    block = [0] * n
    while True:
        sig = {}
        new_block = [0] * n
        for s in range(n):
            key = (
                block[s],
                tuple(
                    -1 if raw_trans[(s, sym)] is None else block[raw_trans[(s, sym)]]
                    for sym in alphabet
                ),
            )
            if key not in sig:
                sig[key] = len(sig)
            new_block[s] = sig[key]
        if new_block == block:
            break
        block = new_block
    n_min = len(set(block))
    trans = {}
    for s in range(n):
        for sym in alphabet:
            t = raw_trans[(s, sym)]
            trans[(block[s], sym)] = None if t is None else block[t]
    return FollowerAutomaton(
        N=N,
        d=tuple(d),
        forbidden=forbidden,
        alphabet=alphabet,
        n_states=n_min,
        start=block[0],
        trans=trans,
    )


@dataclass
class LanguageAlgebra:
    """Concrete model of the follower-set coefficient algebra.

    vertices = realized acceptance profiles (sets of automaton states that
    stay alive under a common right tail); they are the minimal projections.
    """

    automaton: FollowerAutomaton
    atoms: list  # list of frozensets of automaton states
    atom_index: dict = field(repr=False)
    adjacency: list = field(repr=False)  # B_i, int64, B[v][w] = "edges" w -> v
    state_support: dict = field(repr=False)  # state -> 0/1 vector over atoms

    @property
    def dim(self):
        return len(self.atoms)

    def profile_of_word(self, multiword):
        aut = self.automaton
        alive = frozenset(
            m for m in range(aut.n_states) if aut.run(m, multiword) is not None
        )
        return self.atom_index.get(alive)

    def support_vector(self, multiword):
        """0/1 vector of the follower projection of a word, over the atoms."""
        st = self.automaton.state_of(multiword)
        if st is None:
            return np.zeros(self.dim, dtype=np.int64)
        return self.state_support[st].copy()


def build_language_algebra(automaton, cap=DEFAULT_ALGEBRA_CAP):
    aut = automaton
    M = aut.n_states
    ident = tuple(range(M))
    tuples = {ident: 0}
    order = [ident]
    profiles = set()

    def alive(tup):
        return frozenset(m for m in range(M) if tup[m] is not None)

    profiles.add(alive(ident))
    pos = 0
    while pos < len(order):
        tup = order[pos]
        pos += 1
        for sym in aut.alphabet:
            # appending `sym` on the right keeps the word allowable only if
            # the start-state track survives
            if tup[aut.start] is None:
                continue
            if aut.trans[(tup[aut.start], sym)] is None:
                continue
            nxt = tuple(
                None if tup[m] is None else aut.trans[(tup[m], sym)]
                for m in range(M)
            )
            if nxt not in tuples:
                if len(tuples) >= cap:
                    raise CapExceeded(
                        f"profile enumeration exceeded {cap} tuples"
                    )
                tuples[nxt] = len(tuples)
                order.append(nxt)
                profiles.add(alive(nxt))
    atoms = sorted(profiles, key=lambda P: (len(P), sorted(P)))
    atom_index = {P: i for i, P in enumerate(atoms)}
    dim = len(atoms)

    # transfer on atom functions: (Phi_i a)(P) = sum_k [delta_ik appendable
    # after profile P] a(g_ik(P)); adjacency is the transpose
    transfer = [np.zeros((dim, dim), dtype=np.int64) for _ in range(aut.N)]
    for P, pi in atom_index.items():
        for (color, symbol) in aut.alphabet:
            if aut.trans[(aut.start, (color, symbol))] not in P:
                continue
            g = frozenset(
                m
                for m in range(M)
                if aut.trans[(m, (color, symbol))] is not None
                and aut.trans[(m, (color, symbol))] in P
            )
            gi = atom_index.get(g)
            if gi is None:
                # profile reached only through this prepend; register lazily
                raise CapExceeded("unrealized profile hit; raise the cap")
            transfer[color - 1][pi, gi] += 1
    adjacency = [T.T.copy() for T in transfer]

    state_support = {
        m: np.array([1 if m in P else 0 for P in atoms], dtype=np.int64)
        for m in range(M)
    }
    return LanguageAlgebra(
        automaton=aut,
        atoms=atoms,
        atom_index=atom_index,
        adjacency=adjacency,
        state_support=state_support,
    )
