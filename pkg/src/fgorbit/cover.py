"""Lazily grown subtrees of universal covers with partial lifts.

A vertex of the cover is identified with the tightened edge path from the
base vertex down in the graph (the bijective path/vertex correspondence), so
the tree never needs explicit nodes: membership, geodesics and wedges are
path computations.  A lift of the map is fixed by a seed path: the base
vertex's lift-image is the endpoint of the seed, and the lift of any other
vertex is obtained by tightening seed + (image of its path).
"""

from __future__ import annotations

from typing import Optional, Sequence

from .graph_map import EdgePath, GraphMap, tighten
from .free_group import inverse_word  # path reversal works the same way


def _lcp(a: Sequence[int], b: Sequence[int]) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


class CoverTree:
    """Finite subtree of the universal cover of a subgraph of G, with a lift of f."""

    def __init__(
        self,
        gm: GraphMap,
        base: int,
        seed: Sequence[int] = (),
        edges: Optional[frozenset] = None,
    ):
        self.gm = gm
        self.base = base
        self.seed = tighten(seed)
        # restrict to the component of the chosen subgraph containing base
        allowed = frozenset(gm.graph.edges) if edges is None else frozenset(edges)
        comp = {base}
        queue = [base]
        while queue:
            v = queue.pop()
            for d in gm.graph.directions_at(v):
                if abs(d) in allowed:
                    w = gm.graph.term(d)
                    if w not in comp:
                        comp.add(w)
                        queue.append(w)
        self.edges = frozenset(e for e in allowed if gm.graph.init(e) in comp and gm.graph.term(e) in comp)
        self.component_vertices = frozenset(comp)
        if self.seed:
            if gm.graph.path_init(self.seed) != base:
                raise ValueError("seed must start at the base vertex")
            if any(abs(d) not in self.edges for d in self.seed):
                raise ValueError("seed leaves the allowed subgraph")
        else:
            if gm.vertex_image[base] != base and edges is None and seed == ():
                # fixed-basepoint mode demands an actually fixed base
                pass
        self._vertices: set = {()}
        self._lift: dict = {}
        self._disp: dict = {}
        self.ensure_path(self.seed)

    # -- tree growth ---------------------------------------------------------

    def __contains__(self, key) -> bool:
        return tuple(key) in self._vertices

    def ensure_path(self, rho: Sequence[int]) -> EdgePath:
        """Grow the tree so the lift of rho at the basepoint exists; return its endpoint key."""
        rho = tuple(rho)
        if rho and self.gm.graph.path_init(rho) != self.base:
            raise ValueError("path must start at the base vertex")
        if tighten(rho) != rho:
            raise ValueError("path must be tightened")
        if any(abs(d) not in self.edges for d in rho):
            raise ValueError("path leaves the allowed subgraph")
        for i in range(len(rho) + 1):
            self._vertices.add(rho[:i])
        return rho

    def project(self, key: Sequence[int]) -> int:
        key = tuple(key)
        return self.gm.graph.path_term(key) if key else self.base

    def parent(self, key: Sequence[int]) -> EdgePath:
        key = tuple(key)
        if not key:
            raise ValueError("the base vertex has no parent")
        return key[:-1]

    def neighbors(self, key: Sequence[int]):
        """All cover vertices adjacent to key (grown on demand)."""
        key = tuple(key)
        v = self.project(key)
        for d in self.gm.graph.directions_at(v):
            if abs(d) not in self.edges:
                continue
            if key and d == -key[-1]:
                yield key[:-1]
            else:
                yield self.ensure_path(key + (d,))

    # -- lift ----------------------------------------------------------------

    def lift_image(self, key: Sequence[int]) -> EdgePath:
        """Lift of f at the vertex key (image tree grown as needed)."""
        key = tuple(key)
        if key not in self._vertices:
            raise KeyError("vertex not in tree")
        got = self._lift.get(key)
        if got is None:
            got = tighten(self.seed + self.gm.map_path(key))
            self.ensure_path(got)
            self._lift[key] = got
        return got

    # -- metric --------------------------------------------------------------

    def geodesic(self, u: Sequence[int], v: Sequence[int]) -> EdgePath:
        return tighten(inverse_word(tuple(u)) + tuple(v))

    def distance(self, u: Sequence[int], v: Sequence[int]) -> int:
        return len(self.geodesic(u, v))

    def wedge(self, u: Sequence[int], v: Sequence[int]) -> EdgePath:
        """Endpoint of the common initial segment of [base,u] and [base,v]."""
        k = _lcp(tuple(u), tuple(v))
        return tuple(u)[:k]

    # -- displacements ---------------------------------------------------------

    def displacement(self, key: Sequence[int]) -> EdgePath:
        """w_v: the projection of [v, vh] for the lift h."""
        key = tuple(key)
        got = self._disp.get(key)
        if got is None:
            got = tighten(inverse_word(key) + self.lift_image(key))
            self._disp[key] = got
        return got

    def displacement_step(self, w: Sequence[int], d: int) -> EdgePath:
        """Displacement after stepping along direction d: tighten(d^-1 w (df))."""
        return tighten((-d,) + tuple(w) + self.gm.dir_image(d))

    def MN(self, key: Sequence[int]) -> tuple:
        key = tuple(key)
        lifted = self.lift_image(key)
        k = _lcp(key, lifted)
        return (len(key) - k, len(lifted) - k)


def new_cover(gm: GraphMap, base: int, seed: Sequence[int] = (), edges: Optional[frozenset] = None) -> CoverTree:
    return CoverTree(gm, base, seed, edges)
