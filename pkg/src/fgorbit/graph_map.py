"""Marked graphs, edge paths, homotopy equivalences, filtrations and turns.

Directed edges are nonzero integers: a geometric edge ``e > 0`` has reversal
``-e``.  An edge path is a tuple of directed edges with matching endpoints;
tightened paths contain no edge followed by its reversal.

A GraphMap carries a finite graph, a vertex map, tightened edge images, and a
marking that identifies the fundamental group with F_n (a base vertex plus
one loop per generator).  The filtration into strata with zero / irreducible
transition matrices is computed from the edge-crossing digraph.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

from .free_group import (
    Automorphism,
    Word,
    _nielsen_invert,
    canonical_cyclic,
    concat,
    inverse_word,
    reduce_word,
)

EdgePath = tuple  # tuple of nonzero ints


class Graph:
    """Finite graph with directed-edge reversal given by negation."""

    def __init__(self, vertices: Sequence[int], init: dict):
        # init maps every directed edge (both signs) to its initial vertex
        self.vertices = tuple(sorted(set(vertices)))
        self._init = dict(init)
        self.edges = tuple(sorted(e for e in self._init if e > 0))
        for e in self.edges:
            if -e not in self._init:
                raise ValueError(f"edge {e} has no reversal record")
        if any(v not in self.vertices for v in self._init.values()):
            raise ValueError("edge endpoint is not a vertex")
        self._at: dict[int, tuple] = {}
        for d, v in self._init.items():
            self._at.setdefault(v, ())
        for v in self.vertices:
            self._at[v] = tuple(sorted(d for d, u in self._init.items() if u == v))

    @staticmethod
    def rose(rank: int) -> "Graph":
        init = {}
        for e in range(1, rank + 1):
            init[e] = 0
            init[-e] = 0
        return Graph([0], init)

    def init(self, d: int) -> int:
        return self._init[d]

    def term(self, d: int) -> int:
        return self._init[-d]

    def directions_at(self, v: int) -> tuple:
        """Directed edges with initial vertex v."""
        return self._at.get(v, ())

    def valence(self, v: int) -> int:
        return len(self.directions_at(v))

    def path_is_valid(self, p: Sequence[int]) -> bool:
        return all(self.term(p[i]) == self.init(p[i + 1]) for i in range(len(p) - 1))

    def path_init(self, p: Sequence[int]) -> int:
        return self.init(p[0])

    def path_term(self, p: Sequence[int]) -> int:
        return self.term(p[-1])

    def __repr__(self) -> str:
        return f"Graph(V={len(self.vertices)}, E={len(self.edges)})"


def tighten(p: Sequence[int]) -> EdgePath:
    """Remove backtracking; the input must be a consecutive edge sequence."""
    out: list[int] = []
    for d in p:
        if out and out[-1] == -d:
            out.pop()
        else:
            out.append(d)
    return tuple(out)


def cyclic_tighten(p: Sequence[int]) -> EdgePath:
    """Tighten a closed path and strip matching extremes (free homotopy)."""
    w = tighten(p)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return tuple(w[i:j])


def canonical_circuit(p: Sequence[int]) -> EdgePath:
    """Cyclically tighten and rotate to the lexicographically least form."""
    w = cyclic_tighten(p)
    if not w:
        return ()
    n = len(w)
    doubled = list(w) + list(w)
    best = 0
    for i in range(1, n):
        if doubled[i:i + n] < doubled[best:best + n]:
            best = i
    return tuple(doubled[best:best + n])


def prefix_power(u: Sequence[int], p: Sequence[int]) -> int:
    """Largest m such that u^m is a prefix of p."""
    u, p = tuple(u), tuple(p)
    if not u:
        raise ValueError("u must be nontrivial")
    m = 0
    pos = 0
    while pos + len(u) <= len(p) and p[pos:pos + len(u)] == u:
        m += 1
        pos += len(u)
    return m


class Stratum:
    """One stratum of a filtration: its edges, matrix and growth class."""

    def __init__(self, edges: tuple, kind: str, matrix: tuple, lam: Optional[tuple] = None):
        self.edges = tuple(sorted(edges))  # positive edge ids
        self.kind = kind  # 'zero' | 'nonexponential' | 'exponential'
        self.matrix = matrix  # rows indexed like self.edges
        self._lam = lam

    @property
    def lam(self) -> Optional[tuple]:
        """(lo, hi) rational bracket of the growth rate; computed on demand."""
        if self._lam is None and self.kind == "exponential":
            self._lam = pf_interval(self.matrix)
        if self.kind == "nonexponential" and self._lam is None:
            self._lam = (Fraction(1), Fraction(1))
        return self._lam

    def __repr__(self) -> str:
        return f"Stratum({list(self.edges)}, {self.kind})"


class Filtration:
    def __init__(self, strata: Sequence[Stratum]):
        self.strata = tuple(strata)  # bottom-up: strata[0] is the lowest
        self._height: dict[int, int] = {}
        for r, s in enumerate(self.strata, start=1):
            for e in s.edges:
                self._height[e] = r

    def __len__(self) -> int:
        return len(self.strata)

    def stratum(self, r: int) -> Stratum:
        """1-indexed, per the G_r convention."""
        return self.strata[r - 1]

    def edge_height(self, d: int) -> int:
        return self._height[abs(d)]

    def path_height(self, p: Sequence[int]) -> int:
        """Height of a path (0 for the trivial path)."""
        return max((self._height[abs(d)] for d in p), default=0)

    def edges_below(self, r: int) -> frozenset:
        """Positive edges of G_{r-1}."""
        out = []
        for s in self.strata[:r - 1]:
            out.extend(s.edges)
        return frozenset(out)

    def edges_upto(self, r: int) -> frozenset:
        out = []
        for s in self.strata[:r]:
            out.extend(s.edges)
        return frozenset(out)


def _crossing_counts(graph: Graph, edge_image: dict) -> dict:
    counts: dict[int, dict[int, int]] = {e: {} for e in graph.edges}
    for e in graph.edges:
        for d in edge_image[e]:
            counts[e][abs(d)] = counts[e].get(abs(d), 0) + 1
    return counts


def _sccs(nodes: Sequence[int], succ: dict) -> list:
    """Tarjan strongly connected components, deterministic order."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set = set()
    stack: list[int] = []
    out: list[tuple] = []
    counter = [0]

    def strong(v: int) -> None:
        work = [(v, iter(succ.get(v, ())))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                elif w in on_stack:
                    low[node] = min(low[node], index[w])
            if not advanced:
                work.pop()
                if work:
                    low[work[-1][0]] = min(low[work[-1][0]], low[node])
                if low[node] == index[node]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == node:
                            break
                    out.append(tuple(sorted(comp)))

    for v in sorted(nodes):
        if v not in index:
            strong(v)
    return out


def matrix_for(edges: Sequence[int], counts: dict) -> tuple:
    """Transition matrix rows/cols indexed by sorted(edges): entry ij counts
    crossings of edge i by the image of edge j."""
    order = sorted(edges)
    return tuple(
        tuple(counts[ej].get(ei, 0) for ej in order) for ei in order
    )


def pf_interval(matrix: tuple, tol: Fraction = Fraction(1, 1000), max_iter: int = 120) -> tuple:
    """Bracket the Perron-Frobenius eigenvalue of an irreducible matrix with
    outward-rounded rational bounds via power iteration on row ratios."""
    n = len(matrix)
    v = [Fraction(1)] * n
    lo, hi = Fraction(0), Fraction(max(sum(row) for row in matrix))
    for _ in range(max_iter):
        w = [sum(matrix[i][j] * v[j] for j in range(n)) for i in range(n)]
        if any(x == 0 for x in w):
            # reducible input; bail with trivial bounds
            return (Fraction(0), hi)
        ratios = [w[i] / v[i] for i in range(n)]
        lo, hi = max(lo, min(ratios)), min(hi, max(ratios))
        if hi - lo <= tol:
            break
        total = sum(w)
        # keep denominators small; any positive vector yields valid bounds
        v = [Fraction(x * n / total).limit_denominator(10 ** 6) for x in w]
        if any(x <= 0 for x in v):
            v = [x * n / total for x in w]
    return (lo, hi)


def classify(matrix: tuple) -> tuple:
    """Classify a square nonnegative integer matrix: ('zero'|'nonexponential'|
    'exponential', lambda interval or None)."""
    n = len(matrix)
    if all(matrix[i][j] == 0 for i in range(n) for j in range(n)):
        return ("zero", None)
    succ = {j: tuple(i for i in range(n) if matrix[i][j] > 0) for j in range(n)}
    comps = _sccs(range(n), succ)
    if len(comps) != 1 or len(comps[0]) != n:
        raise ValueError("matrix is neither zero nor irreducible")
    is_perm = all(sum(row) == 1 for row in matrix) and all(
        sum(matrix[i][j] for i in range(n)) == 1 for j in range(n)
    )
    if is_perm:
        return ("nonexponential", (Fraction(1), Fraction(1)))
    return ("exponential", pf_interval(matrix))


class Marking:
    """Identification of pi_1(graph) with F_n: a base vertex and one loop per
    generator, plus the derived inverse data (tree collapse and words)."""

    def __init__(self, rank: int, base: int, loops: Sequence[EdgePath]):
        self.rank = rank
        self.base = base
        self.loops = tuple(tighten(p) for p in loops)

    def rewritten(self, translate) -> "Marking":
        """Apply an edge/vertex rewriting (for carrying through moves)."""
        base, loops = translate(self.base, self.loops)
        return Marking(self.rank, base, loops)


class GraphMap:
    """A homotopy equivalence f: G -> G with tightened edge images."""

    def __init__(
        self,
        graph: Graph,
        vertex_image: dict,
        edge_image: dict,
        marking: Optional[Marking] = None,
        check: bool = True,
    ):
        self.graph = graph
        self.vertex_image = dict(vertex_image)
        self.edge_image = {e: tighten(p) for e, p in edge_image.items() if e > 0}
        self.marking = marking
        if check:
            self._check()

    def _check(self) -> None:
        g = self.graph
        for v in g.vertices:
            if self.vertex_image.get(v) not in g.vertices:
                raise ValueError(f"vertex {v} has no image vertex")
        for e in g.edges:
            p = self.edge_image.get(e)
            if p is None:
                raise ValueError(f"edge {e} has no image")
            if not g.path_is_valid(p):
                raise ValueError(f"image of {e} is not a path")
            if p:
                if g.path_init(p) != self.vertex_image[g.init(e)] or g.path_term(p) != self.vertex_image[g.term(e)]:
                    raise ValueError(f"image of {e} has wrong endpoints")
        if self.marking is not None:
            m = self.marking
            if len(m.loops) != m.rank:
                raise ValueError("marking has wrong number of loops")
            for L in m.loops:
                if L and (g.path_init(L) != m.base or g.path_term(L) != m.base):
                    raise ValueError("marking loop is not based at the base vertex")

    # -- basic action ------------------------------------------------------

    def dir_image(self, d: int) -> EdgePath:
        if d > 0:
            return self.edge_image[d]
        return tuple(-x for x in reversed(self.edge_image[-d]))

    def map_path(self, p: Sequence[int], k: int = 1) -> EdgePath:
        """Tightened image of a tightened path under f^k."""
        out = tuple(p)
        for _ in range(k):
            pieces: list[int] = []
            for d in out:
                for x in self.dir_image(d):
                    if pieces and pieces[-1] == -x:
                        pieces.pop()
                    else:
                        pieces.append(x)
            out = tuple(pieces)
        return out

    def map_vertex(self, v: int, k: int = 1) -> int:
        for _ in range(k):
            v = self.vertex_image[v]
        return v

    def map_circuit(self, s: Sequence[int], k: int = 1) -> EdgePath:
        """Cyclically tightened image of a circuit, in canonical rotation."""
        if s and self.graph.path_term(s) != self.graph.path_init(s):
            raise ValueError("not a closed circuit")
        out = tuple(s)
        for _ in range(k):
            out = cyclic_tighten(self.map_path(out))
        return canonical_circuit(out)

    def derivative(self, d: int) -> int:
        """Df: the first edge of the image of direction d."""
        img = self.dir_image(d)
        if not img:
            raise ValueError(f"direction {d} has trivial image")
        return img[0]

    def power(self, m: int) -> "GraphMap":
        """The graph map f^m on the same graph (filtration recomputed)."""
        if m < 1:
            raise ValueError("power must be >= 1")
        vi = {v: self.map_vertex(v, m) for v in self.graph.vertices}
        ei = {e: self.map_path((e,), m) for e in self.graph.edges}
        return GraphMap(self.graph, vi, ei, marking=self.marking, check=False)

    # -- filtration --------------------------------------------------------

    @cached_property
    def filtration(self) -> Filtration:
        g = self.graph
        counts = _crossing_counts(g, self.edge_image)
        succ = {e: tuple(sorted(counts[e])) for e in g.edges}
        comps = _sccs(g.edges, succ)
        # place each SCC after everything it maps into: repeatedly take the
        # addable component with the least edge id
        comp_of = {}
        for c in comps:
            for e in c:
                comp_of[e] = c
        placed: set = set()
        order: list[tuple] = []
        remaining = set(comps)
        while remaining:
            addable = []
            for c in remaining:
                deps = {comp_of[x] for e in c for x in succ[e]} - {c}
                if all(d not in remaining for d in deps):
                    addable.append(c)
            if not addable:
                raise AssertionError("cyclic stratum dependencies")
            nxt = min(addable, key=lambda c: c[0])
            remaining.discard(nxt)
            order.append(nxt)
        strata = []
        for c in order:
            mat = matrix_for(c, counts)
            if len(c) == 1 and mat[0][0] == 0:
                strata.append(Stratum(c, "zero", mat))
            else:
                is_perm = all(sum(row) == 1 for row in mat) and all(
                    sum(mat[i][j] for i in range(len(mat))) == 1 for j in range(len(mat))
                )
                strata.append(Stratum(c, "nonexponential" if is_perm else "exponential", mat))
        filt = Filtration(strata)
        # invariance sanity: images stay at or below their own stratum
        for e in g.edges:
            r = filt.edge_height(e)
            for d in self.edge_image[e]:
                assert filt.edge_height(d) <= r, "filtration not invariant"
        return filt

    def r_length(self, p: Sequence[int], r: int) -> int:
        hr = set(self.filtration.stratum(r).edges)
        return sum(1 for d in p if abs(d) in hr)

    # -- turns and legality -------------------------------------------------

    @cached_property
    def _legal_table(self) -> dict:
        g = self.graph
        turns = []
        for v in g.vertices:
            dirs = g.directions_at(v)
            for i in range(len(dirs)):
                for j in range(i, len(dirs)):
                    turns.append((dirs[i], dirs[j]))
        image = {}
        for t in turns:
            a, b = self.derivative(t[0]), self.derivative(t[1])
            image[t] = (a, b) if a <= b else (b, a)
        status: dict[tuple, bool] = {}
        for t in turns:
            if t in status:
                continue
            orbit = []
            cur = t
            seen_local: dict[tuple, int] = {}
            verdict: Optional[bool] = None
            while True:
                if cur in status:
                    verdict = status[cur]
                    break
                if cur[0] == cur[1]:
                    verdict = False  # degenerate: illegal
                    break
                if cur in seen_local:
                    verdict = True  # periodic without degeneration: legal
                    break
                seen_local[cur] = len(orbit)
                orbit.append(cur)
                cur = image[cur]
            for s in orbit:
                status[s] = verdict
        return status

    def turn_image(self, t: tuple) -> tuple:
        a, b = self.derivative(t[0]), self.derivative(t[1])
        return (a, b) if a <= b else (b, a)

    def is_legal_turn(self, t: tuple) -> bool:
        a, b = t
        if self.graph.init(a) != self.graph.init(b):
            raise ValueError("not a turn: edges start at different vertices")
        key = (a, b) if a <= b else (b, a)
        if a == b:
            return False
        return self._legal_table[key]

    def turns_of_path(self, p: Sequence[int]):
        for i in range(len(p) - 1):
            a, b = -p[i], p[i + 1]
            yield (a, b) if a <= b else (b, a)

    def is_r_legal(self, p: Sequence[int], r: int) -> bool:
        return self.iota_r(p, r) == 0

    def iota_r(self, p: Sequence[int], r: int, cyclic: bool = False) -> int:
        """Number of illegal turns of p involving an edge of H_r."""
        hr = set(self.filtration.stratum(r).edges)
        count = 0
        turns = list(self.turns_of_path(p))
        if cyclic and len(p) >= 1:
            a, b = -p[-1], p[0]
            turns.append((a, b) if a <= b else (b, a))
        for t in turns:
            if (abs(t[0]) in hr or abs(t[1]) in hr) and not self.is_legal_turn(t):
                count += 1
        return count

    def _turn_is_r_illegal(self, a: int, b: int, hr: set) -> bool:
        t = (a, b) if a <= b else (b, a)
        return (abs(a) in hr or abs(b) in hr) and not self.is_legal_turn(t)

    def max_r_legal_run(self, p: Sequence[int], r: int, cyclic: bool = False) -> int:
        """Largest r-length of an r-legal subpath of p."""
        hr = set(self.filtration.stratum(r).edges)
        if not p:
            return 0
        seq = list(p)
        if cyclic:
            breaks = [
                i for i in range(len(seq))
                if self._turn_is_r_illegal(-seq[i - 1], seq[i], hr)
            ]
            if not breaks:
                return self.r_length(seq, r)
            k = breaks[0]
            seq = seq[k:] + seq[:k]
        best = cur = 0
        for i, d in enumerate(seq):
            if i > 0 and self._turn_is_r_illegal(-seq[i - 1], seq[i], hr):
                best = max(best, cur)
                cur = 0
            cur += 1 if abs(d) in hr else 0
        return max(best, cur)

    # -- marking -----------------------------------------------------------

    @cached_property
    def _marking_words(self) -> tuple:
        """(to_rose word per direction, Q, spanning tree edge set)."""
        if self.marking is None:
            raise ValueError("graph map has no marking")
        g = self.graph
        m = self.marking
        # BFS spanning tree from the base vertex
        parent_edge: dict[int, Optional[int]] = {m.base: None}
        queue = [m.base]
        while queue:
            v = queue.pop(0)
            for d in g.directions_at(v):
                w = g.term(d)
                if w not in parent_edge:
                    parent_edge[w] = d
                    queue.append(w)
        if set(parent_edge) != set(g.vertices):
            raise ValueError("graph is not connected")
        tree = {abs(parent_edge[v]) for v in parent_edge if parent_edge[v] is not None}
        nontree = [e for e in g.edges if e not in tree]
        if len(nontree) != m.rank:
            raise ValueError("graph rank does not match the marking rank")
        idx = {e: i + 1 for i, e in enumerate(nontree)}

        def collapse(p: Sequence[int]) -> Word:
            return reduce_word(
                [idx[d] if d > 0 else -idx[-d] for d in p if abs(d) in idx]
            )

        lam_images = [collapse(L) for L in m.loops]
        inv = _nielsen_invert(m.rank, lam_images)
        if inv is None:
            raise ValueError("marking loops do not form a basis")
        to_rose: dict[int, Word] = {}
        for e in g.edges:
            if e in tree:
                to_rose[e] = ()
                to_rose[-e] = ()
            else:
                to_rose[e] = inv[idx[e] - 1]
                to_rose[-e] = inverse_word(inv[idx[e] - 1])
        a_bound = max([1] + [len(to_rose[e]) for e in g.edges])
        b_bound = max([1] + [len(L) for L in m.loops])
        return (to_rose, Fraction(max(a_bound, b_bound)), frozenset(tree))

    @property
    def Q(self) -> Fraction:
        return self._marking_words[1]

    def word_for_path(self, p: Sequence[int]) -> Word:
        to_rose = self._marking_words[0]
        return reduce_word([x for d in p for x in to_rose[d]])

    def word_for(self, s: Sequence[int]) -> Word:
        """Conjugacy-class word of a circuit, canonically rotated."""
        return canonical_cyclic(self.word_for_path(s))

    def circuit_for(self, w: Sequence[int]) -> EdgePath:
        """Canonical immersed circuit representing the class of w."""
        core = canonical_cyclic(w)
        loops = self.marking.loops
        pieces: list[int] = []
        for a in core:
            L = loops[a - 1] if a > 0 else tuple(-x for x in reversed(loops[-a - 1]))
            pieces.extend(L)
        return canonical_circuit(pieces)

    @cached_property
    def induced_automorphism(self) -> Automorphism:
        """The outer automorphism class of f read through the marking."""
        m = self.marking
        words = []
        for L in m.loops:
            words.append(self.word_for_path(self.map_path(L)))
        return Automorphism(m.rank, words)

    def __repr__(self) -> str:
        return f"GraphMap({self.graph!r})"


def rose_map(phi: Automorphism) -> GraphMap:
    """The standard representative of phi on the rank-n rose."""
    g = Graph.rose(phi.rank)
    vi = {0: 0}
    ei = {e: phi.images[e - 1] for e in range(1, phi.rank + 1)}
    marking = Marking(phi.rank, 0, [(e,) for e in range(1, phi.rank + 1)])
    return GraphMap(g, vi, ei, marking=marking)
