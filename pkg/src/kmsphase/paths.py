"""Basis paths of the concrete Fock models and their symbolic algebra.

A basis path labels one basis vector of a multidegree fiber:

* graph: a chain of edges in normal color-ascending order plus a base vertex
  (the base carries the degree-zero component; for nonempty paths it equals
  the source of the last edge),
* mfl: an allowable multiword,
* dynamics: a vertex together with a multidegree.

`compose` implements the product x_left * x_right in normal form, rewriting
across color blocks through the factorization bijections; `strip` is the
adjoint action t(x_prefix)^* and inverts those rewrites.  Both return None
when the result vanishes.
"""

from dataclasses import dataclass

import numpy as np

from . import language as lang
from .errors import FactorizationError, FactorizationRequired, PathError


@dataclass(frozen=True)
class BasisPath:
    kind: str
    degree: tuple
    # graph: data = (edge chain as tuple of (color, edge_index), base vertex)
    # mfl:   data = multiword
    # dynamics: data = vertex index
    data: object

    @property
    def length(self):
        return int(sum(self.degree))


def _swap_maps(instance):
    """Both orientations of the factorization bijections, or flips.

    Returns {(a, b): {(e_a, e_b): (f_b, f_a)}} rewriting an a-then-b pattern
    into b-then-a.  Single-vertex graphs default to the flip; multi-vertex
    graphs with N >= 2 need explicit data.
    """
    if instance.N == 1:
        return {}
    if instance.factorizations is None:
        if len(instance.vertices) == 1:
            swaps = {}
            for i in range(1, instance.N + 1):
                for j in range(1, instance.N + 1):
                    if i == j:
                        continue
                    swaps[(i, j)] = {
                        (a, b): (b, a)
                        for a in range(len(instance.edges[i - 1]))
                        for b in range(len(instance.edges[j - 1]))
                    }
            return swaps
        raise FactorizationRequired(
            "multi-vertex graph with N >= 2 needs explicit factorization data"
        )
    swaps = {}
    for (i, j), mapping in instance.factorizations.items():
        swaps[(i, j)] = dict(mapping)
        swaps[(j, i)] = {(fj, fi): (ei, ej) for (ei, ej), (fj, fi) in mapping.items()}
    return swaps


class GraphPathAlgebra:
    """Symbolic creation/annihilation on normal-form edge chains.

    The factorization swap table is built lazily: only products and adjoints
    need it, so trace-level code never demands factorization data.
    """

    def __init__(self, instance):
        self.instance = instance
        self.edges = instance.edges
        self._swaps = None

    @property
    def swaps(self):
        if self._swaps is None:
            self._swaps = _swap_maps(self.instance)
        return self._swaps

    def src(self, color, e):
        return self.edges[color - 1][e][0]

    def rng(self, color, e):
        return self.edges[color - 1][e][1]

    def vacuum(self, vertex):
        return BasisPath("graph", (0,) * self.instance.N, ((), int(vertex)))

    def _mk(self, chain, base):
        degree = [0] * self.instance.N
        for color, _ in chain:
            degree[color - 1] += 1
        return BasisPath("graph", tuple(degree), (tuple(chain), base))

    def create(self, color, e, path):
        """Normal form of x_{color,e} * path, or None."""
        chain, base = path.data
        if not chain:
            if self.src(color, e) != base:
                return None
            return self._mk([(color, e)], base)
        # junction with the current head: s(new) must equal r(head)
        if self.src(color, e) != self.rng(*chain[0]):
            return None
        seq = list(chain)
        pos, cur = 0, e
        while pos < len(seq) and seq[pos][0] < color:
            c2, f = seq[pos]
            swapped = self.swaps[(color, c2)].get((cur, f))
            if swapped is None:  # non-composable pattern
                return None
            f2, cur = swapped
            seq[pos] = (c2, f2)
            pos += 1
        seq.insert(pos, (color, cur))
        return self._mk(seq, base)

    def pop_head(self, color, path):
        """Undo one color-`color` creation: returns (edge, rest) or None.

        Inverts the bubbling done at creation time, so compose of the
        returned generator with `rest` reproduces `path` exactly.
        """
        chain, base = path.data
        head = None
        for idx, (c, _f) in enumerate(chain):
            if c == color:
                head = idx
                break
            if c > color:
                break
        if head is None:
            return None
        seq = list(chain)
        cur = seq.pop(head)[1]
        for idx in range(head - 1, -1, -1):
            c2, f = seq[idx]
            swapped = self.swaps[(c2, color)].get((f, cur))
            if swapped is None:
                return None
            cur, f2 = swapped
            seq[idx] = (c2, f2)
        return cur, self._mk(seq, base)

    def strip(self, color, e, path):
        """t(x_{color,e})^* applied to a basis path, or None."""
        popped = self.pop_head(color, path)
        if popped is None:
            return None
        cur, rest = popped
        return rest if cur == e else None

    def decompose(self, path, m):
        """Unique factorization path = compose(head, tail) with deg(head) = m."""
        chain, _base = path.data
        if any(a > b for a, b in zip(m, path.degree)):
            raise PathError(f"cannot split degree {path.degree} at {m}")
        rest = path
        head_chain = []
        for color, reps in enumerate(m, start=1):
            for _ in range(reps):
                popped = self.pop_head(color, rest)
                if popped is None:
                    raise PathError("path does not split at this degree")
                edge, rest = popped
                head_chain.append((color, edge))
        if head_chain:
            head = self._mk(head_chain, self.src(*head_chain[-1]))
        else:
            head = self.vacuum(self.path_range(path))
        return head, rest

    def compose(self, left, right):
        """Normal form of x_left * x_right, or None."""
        out = right
        chain, _base = left.data
        for color, e in reversed(chain):
            out = self.create(color, e, out)
            if out is None:
                return None
        if left.length == 0:
            # degree-zero left factor acts as a vertex projection
            lbase = left.data[1]
            return out if self.path_range(out) == lbase else None
        return out

    def path_range(self, path):
        chain, base = path.data
        if not chain:
            return base
        return self.rng(*chain[0])

    def path_source(self, path):
        chain, base = path.data
        if not chain:
            return base
        return self.src(*chain[-1])

    def is_valid(self, path):
        chain, base = path.data
        for (c1, e1), (c2, e2) in zip(chain, chain[1:]):
            if c1 > c2:
                return False
            if self.src(c1, e1) != self.rng(c2, e2):
                return False
        for c, e in chain:
            if not 0 <= e < len(self.edges[c - 1]):
                return False
        if chain and base != self.src(*chain[-1]):
            return False
        return 0 <= base < len(self.instance.vertices)

    def enumerate(self, degree):
        """All valid paths of the given multidegree."""
        plan = []
        for color, reps in enumerate(degree, start=1):
            plan.extend([color] * reps)
        out = []

        def rec(pos, chain):
            if pos < 0:
                if chain:
                    out.append(self._mk(chain, self.src(*chain[-1])))
                return
            color = plan[pos]
            for e in range(len(self.edges[color - 1])):
                if chain and self.src(color, e) != self.rng(*chain[0]):
                    continue
                rec(pos - 1, [(color, e)] + chain)

        if not plan:
            return [self.vacuum(v) for v in range(len(self.instance.vertices))]
        rec(len(plan) - 1, [])
        return out


class MflPathAlgebra:
    def __init__(self, instance):
        self.instance = instance
        self.spec = instance.spec

    def vacuum(self, _index=0):
        return BasisPath("mfl", (0,) * self.spec.N, lang.empty_word(self.spec.N))

    def _mk(self, word):
        return BasisPath("mfl", lang.multidegree(word), word)

    def compose(self, left, right):
        word = lang.concat(left.data, right.data)
        if not lang.word_allowable(word, self.spec.forbidden):
            return None
        return self._mk(word)

    def strip(self, color, s, path):
        word = path.data
        part = word[color - 1]
        if not part or part[0] != s:
            return None
        parts = list(word)
        parts[color - 1] = part[1:]
        return self._mk(tuple(parts))

    def create(self, color, s, path):
        word = lang.concat(
            lang.append_symbol(lang.empty_word(self.spec.N), color, s), path.data
        )
        if not lang.word_allowable(word, self.spec.forbidden):
            return None
        return self._mk(word)

    def is_valid(self, path):
        word = path.data
        for c, part in enumerate(word, start=1):
            if any(not 1 <= s <= self.spec.symbols[c - 1] for s in part):
                return False
        return lang.word_allowable(word, self.spec.forbidden)

    def decompose(self, path, m):
        word = path.data
        if any(a > b for a, b in zip(m, path.degree)):
            raise PathError(f"cannot split degree {path.degree} at {m}")
        head = tuple(part[:k] for part, k in zip(word, m))
        tail = tuple(part[k:] for part, k in zip(word, m))
        return self._mk(head), self._mk(tail)

    def enumerate(self, degree):
        words = []
        stack = [lang.empty_word(self.spec.N)]
        for color, reps in enumerate(degree, start=1):
            for _ in range(reps):
                nxt = []
                for w in stack:
                    for s in range(1, self.spec.symbols[color - 1] + 1):
                        w2 = lang.append_symbol(w, color, s)
                        if lang.word_allowable(w2, self.spec.forbidden):
                            nxt.append(w2)
                stack = nxt
        words = stack
        return [self._mk(w) for w in words]


class DynamicsPathAlgebra:
    def __init__(self, instance):
        self.instance = instance
        self.maps = instance.maps

    def vacuum(self, vertex):
        return BasisPath("dynamics", (0,) * self.instance.N, int(vertex))

    def apply_map(self, n, v):
        for color, reps in enumerate(n, start=1):
            for _ in range(reps):
                v = self.maps[color - 1][v]
        return v

    def compose(self, left, right):
        v = right.data
        if self.apply_map(right.degree, v) != self._anchor(left):
            return None
        deg = tuple(a + b for a, b in zip(left.degree, right.degree))
        return BasisPath("dynamics", deg, v)

    def _anchor(self, path):
        return path.data

    def create(self, color, _j, path):
        deg = list(path.degree)
        deg[color - 1] += 1
        return BasisPath("dynamics", tuple(deg), path.data)

    def strip(self, color, _j, path):
        if path.degree[color - 1] == 0:
            return None
        deg = list(path.degree)
        deg[color - 1] -= 1
        return BasisPath("dynamics", tuple(deg), path.data)

    def is_valid(self, path):
        return 0 <= path.data < len(self.instance.vertices)

    def decompose(self, path, m):
        if any(a > b for a, b in zip(m, path.degree)):
            raise PathError(f"cannot split degree {path.degree} at {m}")
        tail_deg = tuple(a - b for a, b in zip(path.degree, m))
        tail = BasisPath("dynamics", tail_deg, path.data)
        head = BasisPath("dynamics", tuple(m), self.apply_map(tail_deg, path.data))
        return head, tail

    def enumerate(self, degree):
        return [
            BasisPath("dynamics", tuple(degree), v)
            for v in range(len(self.instance.vertices))
        ]


def path_algebra(instance):
    if instance.kind == "graph":
        return GraphPathAlgebra(instance)
    if instance.kind == "mfl":
        return MflPathAlgebra(instance)
    return DynamicsPathAlgebra(instance)


def source_vector(instance, path):
    """The inner product <x_path, x_path> as a 0/1 vector over vertices."""
    dim = instance.dim_A
    vec = np.zeros(dim, dtype=np.int64)
    if path.kind == "graph":
        alg = GraphPathAlgebra(instance)
        vec[alg.path_source(path)] = 1
    elif path.kind == "mfl":
        return instance.algebra.support_vector(path.data)
    else:
        vec[path.data] = 1
    return vec


def range_index(instance, path):
    """Vertex carrying the left action pi(delta_v) x_path = x_path."""
    if path.kind == "graph":
        return GraphPathAlgebra(instance).path_range(path)
    if path.kind == "mfl":
        idx = instance.algebra.profile_of_word(path.data)
        if idx is None:
            raise PathError(f"word {path.data} has an unrealized profile")
        return idx
    return DynamicsPathAlgebra(instance).apply_map(path.degree, path.data)


def parse_path(instance, obj):
    """Build a BasisPath from its JSON form; raises PathError when invalid."""
    alg = path_algebra(instance)
    if instance.kind == "graph":
        blocks = obj["blocks"] if isinstance(obj, dict) else obj
        if len(blocks) != instance.N:
            raise PathError(f"expected {instance.N} color blocks")
        chain = []
        for color, es in enumerate(blocks, start=1):
            chain.extend((color, int(e)) for e in es)
        if not chain:
            base = instance.vertex_index(obj.get("vertex", 0)) if isinstance(
                obj, dict
            ) and "vertex" in obj else 0
            path = alg.vacuum(base)
        else:
            degree = [0] * instance.N
            for c, _ in chain:
                degree[c - 1] += 1
            color0, e0 = chain[-1]
            base = alg.src(color0, e0)
            path = BasisPath("graph", tuple(degree), (tuple(chain), base))
        if not alg.is_valid(path):
            raise PathError(f"edge chain {obj!r} is not composable")
        return path
    if instance.kind == "mfl":
        blocks = obj["blocks"] if isinstance(obj, dict) else obj
        if len(blocks) != instance.N:
            raise PathError(f"expected {instance.N} color blocks")
        word = tuple(tuple(int(s) for s in part) for part in blocks)
        path = BasisPath("mfl", lang.multidegree(word), word)
        if not alg.is_valid(path):
            raise PathError(f"word {obj!r} is not allowable")
        return path
    # dynamics
    if not isinstance(obj, dict) or "degree" not in obj:
        raise PathError("dynamics paths need {'vertex': v, 'degree': [...]}")
    v = instance.vertex_index(obj.get("vertex", instance.vertices[0]))
    degree = tuple(int(x) for x in obj["degree"])
    if len(degree) != instance.N or any(x < 0 for x in degree):
        raise PathError(f"bad multidegree {degree}")
    return BasisPath("dynamics", degree, v)


def check_factorization_associativity(instance):
    """Reject factorization data whose rewrites are order-dependent (N >= 3)."""
    alg = GraphPathAlgebra(instance)
    colors = range(1, instance.N + 1)
    for i in colors:
        for j in colors:
            for k in colors:
                if len({i, j, k}) != 3:
                    continue
                for ei in range(len(instance.edges[i - 1])):
                    for ej in range(len(instance.edges[j - 1])):
                        for ek in range(len(instance.edges[k - 1])):
                            base = alg.vacuum(alg.src(k, ek))
                            p_k = alg.create(k, ek, base)
                            if p_k is None:
                                continue
                            p_jk = alg.create(j, ej, p_k)
                            p_ij = None
                            if p_jk is not None:
                                p_ij = alg.create(i, ei, p_jk)
                            # associate the other way: (x_i x_j) x_k
                            q = None
                            pj = alg.create(
                                j, ej, alg.vacuum(alg.src(j, ej))
                            )
                            pij = alg.create(i, ei, pj) if pj else None
                            if pij is not None:
                                q = alg.compose(pij, p_k)
                            if p_ij != q:
                                raise FactorizationError(
                                    "factorization data is not associative on "
                                    f"colors ({i},{j},{k})"
                                )
