"""Explicit cancellation and quasi-isometry constants for a graph map.

All constants are over-approximations; every downstream use compares an
integer path length against a threshold, so each rational constant is also
stored with an integer ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .cover import CoverTree
from .free_group import inverse_word
from .graph_map import Graph, GraphMap, tighten


def size(gm: GraphMap) -> int:
    """S_f: the maximum length of an edge image."""
    lengths = []
    for e in gm.graph.edges:
        p = gm.edge_image[e]
        if not p:
            raise ValueError(f"edge {e} has an empty image")
        lengths.append(len(p))
    return max(lengths)


def _size_or_one(vertex_image: dict, edge_image: dict) -> int:
    return max([1] + [len(p) for p in edge_image.values()])


def compose_maps(first: GraphMap, second: GraphMap) -> tuple:
    """Vertex and edge data of the composite x -> second(first(x))."""
    vi = {v: second.vertex_image[first.vertex_image[v]] for v in first.graph.vertices}
    ei = {e: second.map_path(first.edge_image[e]) for e in first.graph.edges}
    return vi, ei


class _CompositeMap:
    """Just enough of the GraphMap surface for CoverTree displacement work."""

    def __init__(self, graph: Graph, vertex_image: dict, edge_image: dict):
        self.graph = graph
        self.vertex_image = vertex_image
        self.edge_image = edge_image

    def dir_image(self, d: int):
        if d > 0:
            return self.edge_image[d]
        return tuple(-x for x in reversed(self.edge_image[-d]))

    def map_path(self, p, k: int = 1):
        out = tuple(p)
        for _ in range(k):
            pieces = []
            for d in out:
                for x in self.dir_image(d):
                    if pieces and pieces[-1] == -x:
                        pieces.pop()
                    else:
                        pieces.append(x)
            out = tuple(pieces)
        return out


def homotopy_inverse(gm: GraphMap) -> GraphMap:
    """A homotopy inverse g of f on the same graph, built through the marking.

    Every vertex of g maps to the marking base vertex, so f.g fixes the base
    vertex and g.f fixes its f-image; both composites induce the identity on
    the fundamental group based there.
    """
    m = gm.marking
    psi_inv = gm.induced_automorphism.inverse()
    loops = m.loops

    def realize(word) -> tuple:
        pieces = []
        for a in word:
            L = loops[a - 1] if a > 0 else tuple(-x for x in reversed(loops[-a - 1]))
            pieces.extend(L)
        return tighten(pieces)

    vi = {v: m.base for v in gm.graph.vertices}
    ei = {}
    for e in gm.graph.edges:
        ei[e] = realize(psi_inv.apply(gm.word_for_path((e,))))
    return GraphMap(gm.graph, vi, ei, marking=m, check=False)


def compute_B(gm: GraphMap, inverse: GraphMap, order: str = "fg") -> int:
    """B bound of the displacement |x, x (fg)~| over the universal cover.

    ``order='fg'`` bounds the composite f then g (which fixes g's base
    image); ``order='gf'`` the other composition.
    """
    if order == "fg":
        first, second = gm, inverse
        base = inverse.marking.base
    else:
        first, second = inverse, gm
        base = gm.vertex_image[gm.marking.base]
    vi, ei = compose_maps(first, second)
    if vi[base] != base:
        raise AssertionError("composite does not fix the chosen base vertex")
    comp = _CompositeMap(gm.graph, vi, ei)
    cover = CoverTree(comp, base)  # type: ignore[arg-type]
    # one displacement per base vertex: BFS tree paths
    parent: dict[int, tuple] = {base: ()}
    queue = [base]
    while queue:
        v = queue.pop(0)
        for d in gm.graph.directions_at(v):
            w = gm.graph.term(d)
            if w not in parent:
                parent[w] = parent[v] + (d,)
                queue.append(w)
    B = 0
    for v, rho in parent.items():
        key = cover.ensure_path(rho)
        B = max(B, len(cover.displacement(key)))
    S_comp = _size_or_one(vi, ei)
    return 1 + B + S_comp


@dataclass(frozen=True)
class ConstantsBundle:
    S_f: int
    S_g: int
    B_fg: int
    B_gf: int
    K: int
    D_f: Fraction
    D_g: Fraction
    C_f: Fraction
    C_g: Fraction
    C_f_int: int
    C_g_int: int
    C_low: int

    def as_dict(self) -> dict:
        return {
            "S_f": self.S_f,
            "S_g": self.S_g,
            "B_fg": self.B_fg,
            "B_gf": self.B_gf,
            "K": self.K,
            "D_f": str(self.D_f),
            "D_g": str(self.D_g),
            "C_f": str(self.C_f),
            "C_g": str(self.C_g),
            "C_f_int": self.C_f_int,
            "C_g_int": self.C_g_int,
            "C_low": self.C_low,
        }


def sharp_cancellation(gm: GraphMap, cap: int) -> int:
    """The exact single-junction cancellation bound of the map.

    For reduced paths alpha, beta leaving a common point through distinct
    directions, |alpha f ^ beta f| is governed by an alignment game between
    the two image streams; its value function is monotone, bounded by any
    valid cancellation constant, and computable by value iteration over
    (pending suffix, frontier, forbidden backtracks) states.
    """
    g = gm.graph

    def dirs_at(v: int, forbid: int):
        return [d for d in g.directions_at(v) if d != forbid]

    # state: either ("t", x, y) a fresh pair of directions, or
    # ("w", delta, vx, fx, vy, fy): delta is the pending image suffix owned
    # by the y side; the x side must keep matching it.
    value: dict = {}
    from functools import lru_cache

    def successors(state):
        kind = state[0]
        out = []  # (gain, next_state or None)
        if kind == "t":
            _, x, y = state
            fx_img, fy_img = gm.dir_image(x), gm.dir_image(y)
            m = 0
            n = min(len(fx_img), len(fy_img))
            while m < n and fx_img[m] == fy_img[m]:
                m += 1
            if m < len(fx_img) and m < len(fy_img):
                return [(m, None)]
            if m == len(fx_img) and m == len(fy_img):
                # both first images exhausted together
                for x2 in dirs_at(g.term(x), -x):
                    for y2 in dirs_at(g.term(y), -y):
                        out.append((m, ("t", x2, y2)))
                if not out:
                    out.append((m, None))
                return out
            if m == len(fx_img):
                delta = fy_img[m:]
                return [(m, ("w", delta, g.term(x), -x, g.term(y), -y))]
            delta = fx_img[m:]
            return [(m, ("w", delta, g.term(y), -y, g.term(x), -x))]
        _, delta, vx, fx, vy, fy = state
        for e in dirs_at(vx, fx):
            img = gm.dir_image(e)
            m = 0
            n = min(len(img), len(delta))
            while m < n and img[m] == delta[m]:
                m += 1
            if m < len(img) and m < len(delta):
                out.append((m, None))
            elif m == len(img) and m == len(delta):
                for x2 in dirs_at(g.term(e), -e):
                    for y2 in dirs_at(vy, fy):
                        out.append((m, ("t", x2, y2)))
                if not any(s is not None for _, s in out):
                    out.append((m, None))
            elif m == len(img):
                out.append((m, ("w", delta[m:], g.term(e), -e, vy, fy)))
            else:
                out.append((m, ("w", img[m:], vy, fy, g.term(e), -e)))
        if not out:
            out.append((0, None))
        return out

    # collect reachable states from all nondegenerate turns
    roots = []
    for v in g.vertices:
        ds = g.directions_at(v)
        for i, a in enumerate(ds):
            for b in ds[i + 1:]:
                roots.append(("t", a, b))
    succ_cache: dict = {}
    frontier = list(roots)
    seen = set(roots)
    while frontier:
        st = frontier.pop()
        succ_cache[st] = successors(st)
        for _, nxt in succ_cache[st]:
            if nxt is not None and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
        if len(seen) > 200000:
            return cap  # state space too large; fall back to the formula
    vals = {st: 0 for st in seen}
    for _ in range(cap + 2):
        changed = False
        for st in seen:
            best = 0
            for gain, nxt in succ_cache[st]:
                cand = gain + (vals[nxt] if nxt is not None else 0)
                if cand > best:
                    best = cand
            if best > cap:
                return cap  # cannot exceed a valid constant: numeric guard
            if best != vals[st]:
                vals[st] = best
                changed = True
        if not changed:
            break
    else:
        return cap
    return max((vals[r] for r in roots), default=0)


def bundle(gm: GraphMap) -> ConstantsBundle:
    """All constants for f: sizes, B bounds, quasi-isometry and cancellation."""
    cached = getattr(gm, "_constants_bundle", None)
    if cached is not None:
        return cached
    g = homotopy_inverse(gm)
    S_f = size(gm)
    S_g = _size_or_one(g.vertex_image, g.edge_image)
    B_fg = compute_B(gm, g, "fg")
    B_gf = compute_B(gm, g, "gf")
    K = max(S_f, S_g)
    D_f = Fraction(2 * B_fg, K)
    D_g = Fraction(2 * B_gf, K)
    C_f = (B_fg + D_g + S_g) * K
    C_g = (B_gf + D_f + S_f) * K
    out = ConstantsBundle(
        S_f=S_f,
        S_g=S_g,
        B_fg=B_fg,
        B_gf=B_gf,
        K=K,
        D_f=D_f,
        D_g=D_g,
        C_f=C_f,
        C_g=C_g,
        C_f_int=math.ceil(C_f),
        C_g_int=math.ceil(C_g),
        C_low=S_f * (1 + len(gm.graph.edges)),
    )
    gm._constants_bundle = out
    return out
