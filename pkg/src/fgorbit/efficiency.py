"""Sliding moves, fixed-point detection for lifts, and efficient maps.

An efficient map is a normalized train track representative whose single-edge
nonexponential strata E have image E.u with u a closed path at a fixed
vertex, u of Nielsen period one whenever it is periodic Nielsen at all, and
no slide turning E into a fixed edge.  The fixed-point search underlying the
last condition runs breadth-first over a cover of the lower strata, pruning
with the cancellation constants and following attracting/repelling rays to
certified stopping points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .constants import ConstantsBundle, bundle
from .cover import CoverTree, _lcp
from .free_group import Automorphism, inverse_word
from .graph_map import EdgePath, GraphMap, tighten
from .train_track import (
    NormalizedMap,
    TrainTrackUnavailable,
    _aligned_order,
    check_normalized,
    install_filtration,
    normalize,
    slide_edge,
    tidy,
    train_track_with_power,
)

SEARCH_NODE_LIMIT = 500_000  # bug detector, not a truncation: exceeding raises


class SearchDiverged(AssertionError):
    pass


# ---------------------------------------------------------------------------
# stratum bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class StratumInfo:
    kind: str  # 'zero' | 'exponential' | 'constant' | 'linear' | 'nonlinear'
    edge: Optional[int] = None
    suffix: EdgePath = ()


class Efficient:
    """An efficient representative along with its derived per-stratum data."""

    def __init__(self, gm: GraphMap, exponent: int):
        from .constants import sharp_cancellation

        self.gm = gm
        self.exponent = exponent  # the represented power of the input class
        self.bundle: ConstantsBundle = bundle(gm)
        self._sharp = sharp_cancellation(gm, self.bundle.C_f_int)
        self.info: dict[int, StratumInfo] = {}
        filt = gm.filtration
        for r in range(1, len(filt) + 1):
            s = filt.stratum(r)
            if s.kind == "zero":
                self.info[r] = StratumInfo("zero")
            elif s.kind == "exponential":
                self.info[r] = StratumInfo("exponential")
            else:
                e = s.edges[0]
                u = gm.edge_image[e][1:]
                if not u:
                    self.info[r] = StratumInfo("constant", e, ())
                elif gm.map_path(u) == u:
                    self.info[r] = StratumInfo("linear", e, u)
                else:
                    self.info[r] = StratumInfo("nonlinear", e, u)

    @property
    def C_f(self) -> int:
        """The working cancellation constant (the exact junction bound when
        it was computable, else the formula over-approximation)."""
        return min(self._sharp, self.bundle.C_f_int)

    @property
    def C_low(self) -> int:
        return self.bundle.C_low

    def kind(self, r: int) -> str:
        return self.info[r].kind

    def suffix(self, r: int) -> EdgePath:
        return self.info[r].suffix

    def power_view(self, q: int) -> "Efficient":
        """The efficient structure of f^q (efficiency survives powers: a
        fixed point of the q-th power of a fixed-point-free lift would give a
        periodic and hence fixed point of the lift itself)."""
        if q == 1:
            return self
        return Efficient(self.gm.power(q), self.exponent * q)


# ---------------------------------------------------------------------------
# slide moves for nonexponential strata
# ---------------------------------------------------------------------------


@dataclass
class SlideMove:
    stratum: int
    edge: int
    path: EdgePath  # from the terminal vertex of the edge, inside G_{r-1}


def slide(gm: GraphMap, move: SlideMove) -> GraphMap:
    """Slide a nonexponential edge along a lower path; same outer class."""
    filt = gm.filtration
    r = move.stratum
    if filt.stratum(r).kind != "nonexponential":
        raise ValueError("can only slide single-edge nonexponential strata")
    lower = filt.edges_below(r)
    if any(abs(d) not in lower for d in move.path):
        raise ValueError("slide path must stay below the stratum")
    if not move.path:
        return gm
    return tidy(slide_edge(gm, move.edge, move.path), merge_valence2=False)


# ---------------------------------------------------------------------------
# the fixed-point / slide-to-constant search (breadth-first with certified
# pruning)
# ---------------------------------------------------------------------------


def interpolation_bound(L: int, K: int, D) -> Fraction:
    """Lower bound 2L/(K+1) - D for displacements along a long fixed segment."""
    return Fraction(2 * L, K + 1) - D


@dataclass
class RaySearchState:
    cover: CoverTree
    target: EdgePath
    C_f: int
    C_low: int
    trace: Optional[list] = None
    expanded: int = 0
    seen: set = field(default_factory=set)

    def log(self, event: str, **data) -> None:
        if self.trace is not None:
            self.trace.append({"event": event, **data})


def _height(gm: GraphMap, p: Sequence[int]) -> int:
    return gm.filtration.path_height(p)


def follow_attracting_ray(eff: Efficient, state: RaySearchState, v1: EdgePath) -> int:
    """Depth at which the attracting branch through v1 may be cut off.

    The branch with M = 0 is determined by its first edge; once the
    displacement provably exceeds |target| + C_f forever, nothing beyond can
    match the target.
    """
    gm = eff.gm
    filt = gm.filtration
    first = v1[-1]
    s = filt.edge_height(first)
    bound = len(state.target) + state.C_f
    kind = eff.kind(s) if filt.stratum(s).kind == "nonexponential" else "exponential"
    if kind == "exponential":
        # stop once the stratum length of the branch prefix exceeds the bound
        return -1  # handled incrementally by the caller via stratum length
    if kind == "linear":
        return -1  # displacement repeats within |u_s| steps: the seen set fires
    if kind == "constant":
        return 1
    # nonlinear: follow the attracting ray prefix until the interpolation
    # bound guarantees big displacements
    from . import nielsen

    K, D = eff.bundle.K, eff.bundle.D_f
    L = 1
    while interpolation_bound(L, K, D) <= bound:
        L += 1
    u_s = eff.suffix(s)
    k0 = nielsen.growth_exponent(eff, u_s, L)
    depth = 1 + len(state.target) + state.C_f
    prefix_len = 1
    for k in range(k0 + 1):
        prefix_len += len(gm.map_path(u_s, k))
    return prefix_len


def next_repelling_vertex(eff: Efficient, state: RaySearchState, key: EdgePath) -> Optional[EdgePath]:
    """The unique child of key that can continue a repelling ray, or None.

    A continuation requires some depth-L probe below it whose image overlaps
    the displacement by more than C_f; bounded cancellation caps how much
    agreement a diverged probe can recover, so the probe tree is cut early.
    """
    gm = eff.gm
    cover = state.cover
    w = cover.displacement(key)
    C = state.C_f
    K, D = eff.bundle.K, eff.bundle.D_f
    L_probe = 1
    while Fraction(L_probe, K) - D < 2 * C + 1:
        L_probe += 1
    g = gm.graph
    best: Optional[EdgePath] = None
    avoid = key[-1] if key else None
    # delta: the probe path below key (reduced, not backtracking into key)
    stack: list[EdgePath] = [()]
    while stack:
        delta = stack.pop()
        v = cover.project(key + delta)
        for d in g.directions_at(v):
            if abs(d) not in cover.edges:
                continue
            if delta and d == -delta[-1]:
                continue
            if not delta and avoid is not None and d == -avoid:
                continue
            new_delta = delta + (d,)
            img = gm.map_path(new_delta)
            agree = _lcp(img, w)
            if agree > C:
                cand = key + (new_delta[0],)
                if best is not None and best != cand:
                    raise AssertionError("two repelling continuations: bounded cancellation violated")
                best = cand
                continue
            if len(img) - C > agree:
                continue  # the committed image prefix diverged from w
            if len(new_delta) < L_probe:
                stack.append(new_delta)
    return best


def repelling_termination(eff: Efficient, state: RaySearchState, key: EdgePath) -> bool:
    """True when the repelling candidate at key is past its stop bound."""
    gm = eff.gm
    cover = state.cover
    w = cover.displacement(key)
    if not w:
        return False
    M, N = cover.MN(key)
    bound = max(state.C_low, len(state.target))
    s = _height(gm, w)
    if gm.filtration.stratum(s).kind == "exponential":
        return gm.iota_r(w, s) > bound
    return M > bound + state.C_f


def search_slide_to_constant(
    gm_or_eff,
    r: int,
    trace: Optional[list] = None,
) -> Optional[EdgePath]:
    """A lower path rho with tighten(rho^-1 . u_r . rho f) trivial, or None.

    Sliding the stratum edge along rho then yields a fixed edge.  The search
    runs breadth-first over the cover of the lower component at the edge's
    terminal vertex, with the lift whose basepoint displacement is u_r.
    """
    eff = gm_or_eff if isinstance(gm_or_eff, Efficient) else Efficient(gm_or_eff, 1)
    gm = eff.gm
    filt = gm.filtration
    info = eff.info[r]
    e = info.edge
    u = info.suffix
    if not u:
        return ()
    lower = filt.edges_below(r)
    base = gm.graph.term(e)
    cover = CoverTree(gm, base, seed=u, edges=lower)
    state = RaySearchState(
        cover=cover,
        target=(),
        C_f=eff.C_f,
        C_low=eff.C_low,
        trace=trace,
    )
    C = state.C_f
    from collections import deque

    queue = deque([()])
    state.seen.add((base, cover.displacement(())))
    while queue:
        key = queue.popleft()
        state.expanded += 1
        if state.expanded > SEARCH_NODE_LIMIT:
            raise SearchDiverged("slide search exceeded its node budget")
        w = cover.displacement(key)
        if not w:
            state.log("fixed-point", path=list(key))
            return key
        M, N = cover.MN(key)
        # once the forward part exceeds the cancellation constant, no
        # descendant displacement can collapse to the trivial target
        if N > C:
            state.log("prune-N", path=list(key), M=M, N=N)
            continue
        children = [c for c in cover.neighbors(key) if len(c) > len(key)]
        if M > C:
            # only one child can continue a repelling ray; the others gain
            # backward length faster than cancellation can remove it
            if repelling_termination(eff, state, key):
                state.log("stop-repelling", path=list(key), M=M, N=N)
                continue
            cand = next_repelling_vertex(eff, state, key)
            state.log("repelling-step", path=list(key), candidate=list(cand) if cand else None)
            children = [cand] if cand is not None else []
        for child in children:
            wc = cover.displacement(child)
            sig = (cover.project(child), wc)
            if sig in state.seen:
                state.log("prune-seen", path=list(child))
                continue
            state.seen.add(sig)
            queue.append(child)
    state.log("exhausted", expanded=state.expanded)
    return None


# ---------------------------------------------------------------------------
# rays and inverse images
# ---------------------------------------------------------------------------


def map_path_inverse(gm: GraphMap, rho: Sequence[int]) -> Optional[EdgePath]:
    """The unique path beta with beta f = rho and the same (fixed) endpoints."""
    rho = tuple(rho)
    g = gm.graph
    if rho:
        p, q = g.path_init(rho), g.path_term(rho)
    else:
        raise ValueError("inverse image of a trivial path needs a basepoint")
    if gm.vertex_image[p] != p or gm.vertex_image[q] != q:
        raise ValueError("endpoints must be fixed")
    b = bundle(gm)
    limit = b.K * (len(rho) + math.ceil(b.D_f)) + 1
    C = b.C_f_int
    stack: list[tuple] = [((), ())]
    while stack:
        beta, img = stack.pop()
        v = g.path_term(beta) if beta else p
        if v == q and img == rho:
            return beta
        if len(beta) >= limit:
            continue
        for d in g.directions_at(v):
            if beta and d == -beta[-1]:
                continue
            nimg = tighten(tuple(img) + gm.dir_image(d))
            agree = _lcp(nimg, rho)
            if len(nimg) - C > agree:
                continue
            if agree < len(nimg) and len(nimg) <= agree + C and len(nimg) > len(rho):
                continue
            stack.append((tuple(beta) + (d,), nimg))
    return None


def ray_prefix_R(eff: Efficient, r: int, length: int) -> EdgePath:
    """Prefix of the attracting fixed ray E_r u_r (u_r f)(u_r f^2)..."""
    info = eff.info[r]
    if info.kind not in ("nonlinear",):
        raise ValueError("attracting ray needs a nonconstant nonlinear stratum")
    gm = eff.gm
    e, u = info.edge, info.suffix
    word: EdgePath = (e,) + u
    k = 1
    prev = word
    for _ in range(4 * length + 64):
        word = tighten(word + gm.map_path(u, k))
        k += 1
        agree = _lcp(prev, word)
        if agree >= length and len(word) >= length:
            return word[:length]
        prev = word
    raise AssertionError("attracting ray prefix did not stabilize")


def ray_prefix_S(eff: Efficient, r: int, length: int) -> EdgePath:
    """Prefix of the repelling fixed ray E_r (u_r^-1 f^-1)(u_r^-1 f^-2)..."""
    info = eff.info[r]
    if info.kind not in ("nonlinear",):
        raise ValueError("repelling ray needs a nonconstant nonlinear stratum")
    gm = eff.gm
    e, u = info.edge, info.suffix
    block = inverse_word(u)
    word: EdgePath = (e,)
    prev = word
    for _ in range(4 * length + 64):
        nxt = map_path_inverse(gm, block)
        if nxt is None:
            raise AssertionError("repelling ray block has no inverse image")
        block = nxt
        word = tighten(word + block)
        agree = _lcp(prev, word)
        if agree >= length and len(word) >= length:
            return word[:length]
        prev = word
    raise AssertionError("repelling ray prefix did not stabilize")


# ---------------------------------------------------------------------------
# making a stratum efficient (no fixed point exists)
# ---------------------------------------------------------------------------


def make_efficient_stratum(eff: Efficient, r: int) -> tuple[SlideMove, int]:
    """A slide making the stratum suffix a closed path at a fixed vertex,
    plus the power of the map needed (1 unless a periodic vertex is used)."""
    gm = eff.gm
    filt = gm.filtration
    info = eff.info[r]
    e, u = info.edge, info.suffix
    C = eff.C_f

    U_prev: EdgePath = ()
    U = tuple(u)
    V_prev: EdgePath = ()
    heights: list[int] = []
    ws: list[EdgePath] = []
    Vs: list[EdgePath] = []
    for k in range(1, 4096):
        U_next = tighten(U + gm.map_path(u, k))
        V = U[: _lcp(U, U_next)]
        if Vs:
            assert len(V) > len(Vs[-1]), "prefix growth stalled: a fixed point exists"
            w = V[len(Vs[-1]):]
        else:
            w = V
        Vs.append(V)
        ws.append(w)
        heights.append(_height(gm, w))
        # need at least two displacement words at the stabilized height
        if len(ws) >= 2 and heights[-1] == heights[-2]:
            s = heights[-1]
            kind = filt.stratum(s).kind
            if kind == "nonexponential":
                es = filt.stratum(s).edges[0]
                if (
                    gm.r_length(ws[-2], s) == gm.r_length(ws[-1], s)
                    and gm.r_length(ws[-2], s) >= 1
                ):
                    # initial endpoint of an occurrence of the stratum edge:
                    # before a positive crossing, after a negative one
                    base_pos = len(Vs[-2]) - len(ws[-2])
                    for i, d in enumerate(ws[-2]):
                        if abs(d) == es:
                            pos = base_pos + (i if d > 0 else i + 1)
                            return (SlideMove(r, e, tuple(Vs[-2][:pos])), 1)
            else:
                run = gm.max_r_legal_run(ws[-1], s)
                if run >= 2 * (C + 1):
                    w_next = None
                    U_nn = tighten(U_next + gm.map_path(u, k + 1))
                    V_next = U_next[: _lcp(U_next, U_nn)]
                    w_next = V_next[len(Vs[-1]):]
                    pos = _fixed_vertex_in_legal_run(gm, s, w_next, C)
                    if pos is not None:
                        rho = V_next[: len(Vs[-1]) + pos]
                        return (SlideMove(r, e, tuple(rho)), 1)
                else:
                    got = _nielsen_piece_start(eff, s, ws[-1])
                    if got is not None:
                        offset, period = got
                        rho = Vs[-1][: len(Vs[-2]) + offset]
                        return (SlideMove(r, e, tuple(rho)), period)
        U_prev, U = U, U_next
    raise AssertionError("stratum improvement iteration did not settle")


def _fixed_vertex_in_legal_run(gm: GraphMap, s: int, w: Sequence[int], C: int) -> Optional[int]:
    """Position in w of a fixed vertex inside a legal run, >= C stratum-edges
    from the nearest illegal turn on both sides."""
    filt = gm.filtration
    hs = set(filt.stratum(s).edges)
    w = tuple(w)
    breaks = [-1]
    for i in range(len(w) - 1):
        a, b = -w[i], w[i + 1]
        t = (a, b) if a <= b else (b, a)
        if (abs(a) in hs or abs(b) in hs) and not gm.is_legal_turn(t):
            breaks.append(i)
    breaks.append(len(w) - 1)
    for bi in range(len(breaks) - 1):
        lo, hi = breaks[bi] + 1, breaks[bi + 1]
        # vertices sit at positions lo..hi (after edges lo-1..hi)
        for pos in range(lo + 1, hi + 1):
            v = gm.graph.path_term(w[:pos])
            if gm.vertex_image[v] != v:
                continue
            left = gm.r_length(w[lo:pos], s)
            right = gm.r_length(w[pos:hi + 1], s)
            if left >= C and right >= C:
                return pos
    return None


def _nielsen_piece_start(eff: Efficient, s: int, w: Sequence[int]) -> Optional[tuple]:
    """Offset and period of the first height-s periodic Nielsen piece of w,
    when w decomposes as Nielsen pieces of height s and lower paths."""
    from . import nielsen

    gm = eff.gm
    filt = gm.filtration
    hs = set(filt.stratum(s).edges)
    w = tuple(w)
    idxs = [i for i, d in enumerate(w) if abs(d) in hs]
    if not idxs:
        return None
    for a in range(len(w)):
        if abs(w[a]) not in hs:
            continue
        for b in range(len(w) - 1, a - 1, -1):
            if abs(w[b]) not in hs:
                continue
            piece = w[a:b + 1]
            period = nielsen.is_periodic_nielsen(eff, piece)
            if period is not None:
                return (a, period)
        break
    return None


# ---------------------------------------------------------------------------
# linearity detection and the efficiency pipeline
# ---------------------------------------------------------------------------


def detect_linear(eff: Efficient, r: int) -> Optional[int]:
    """Nielsen period of the stratum suffix (1 means already linear), or
    None when the suffix is not periodic Nielsen at all."""
    from . import nielsen

    info = eff.info[r]
    if info.kind == "constant":
        return None
    return nielsen.is_periodic_nielsen(eff, info.suffix)


@dataclass
class EfficiencyCertificate:
    passed: bool
    strata: list
    failure: Optional[str] = None


def compute_efficient(phi: Automorphism, trace: Optional[list] = None) -> Efficient:
    """An efficient representative of a power of phi's outer class.

    Raises TrainTrackUnavailable when no workable representative of any
    small power exists (callers may then try the inverse automorphism).
    """
    gm, m0 = train_track_with_power(phi, effort="fast")
    nm = normalize(gm)
    f, k = nm.gm, m0 * nm.exponent
    for _ in range(48):
        eff = Efficient(f, k)
        restart = False
        filt = f.filtration
        for r in range(1, len(filt) + 1):
            info = eff.info[r]
            if info.kind in ("zero", "exponential", "constant"):
                continue
            u = info.suffix
            g = f.graph
            closed_fixed = (
                g.path_init(u) == g.path_term(u)
                and f.vertex_image[g.path_init(u)] == g.path_init(u)
            )
            rho = search_slide_to_constant(eff, r, trace=trace)
            if rho is not None:
                f = slide(f, SlideMove(r, info.edge, rho))
                restart = True
                break
            if not closed_fixed:
                move, m = make_efficient_stratum(eff, r)
                f = slide(f, move)
                if m > 1:
                    nm2 = normalize(f.power(m))
                    f, k = nm2.gm, k * m * nm2.exponent
                restart = True
                break
            p = detect_linear(eff, r)
            if p is not None and p > 1:
                nm2 = normalize(f.power(p))
                f, k = nm2.gm, k * p * nm2.exponent
                restart = True
                break
        if restart:
            continue
        # final ordering: Nielsen suffixes before non-Nielsen at equal height
        nielsen_first = {}
        for r in range(1, len(filt) + 1):
            info = eff.info[r]
            if info.edge is not None:
                nielsen_first[info.edge] = info.kind in ("constant", "linear")
        order = _aligned_order(f, nielsen_first=nielsen_first)
        if order is not None and order != list(range(len(filt))):
            f = install_filtration(f, order)
            eff = Efficient(f, k)
        cert = check_efficient(eff)
        if cert.passed:
            return eff
        raise AssertionError(f"efficiency assembly failed: {cert.failure}")
    raise AssertionError("efficiency pipeline did not stabilize")


def check_efficient(eff: Efficient, recheck_slides: bool = False) -> EfficiencyCertificate:
    """Verify the three stratum conditions and the ordering rule."""
    gm = eff.gm
    filt = gm.filtration
    g = gm.graph
    strata = []
    ok, bad = check_normalized(gm)
    if not ok:
        return EfficiencyCertificate(False, strata, f"normalization violated: {bad}")
    for r in range(1, len(filt) + 1):
        info = eff.info[r]
        strata.append((r, info.kind))
        if info.kind in ("zero", "exponential"):
            continue
        u = info.suffix
        if info.kind == "constant":
            continue
        if g.path_init(u) != g.path_term(u) or gm.vertex_image[g.path_init(u)] != g.path_init(u):
            return EfficiencyCertificate(False, strata, f"stratum {r}: suffix not closed at a fixed vertex")
        if info.kind == "linear":
            if gm.map_path(u) != u:
                return EfficiencyCertificate(False, strata, f"stratum {r}: linear suffix not fixed")
        else:
            from . import nielsen

            if nielsen.is_periodic_nielsen(eff, u) is not None:
                return EfficiencyCertificate(False, strata, f"stratum {r}: periodic suffix with period > 1")
        if recheck_slides:
            if search_slide_to_constant(eff, r) is not None:
                return EfficiencyCertificate(False, strata, f"stratum {r}: a slide to a constant edge exists")
    # ordering: same-height suffixes, Nielsen before non-Nielsen
    for r in range(1, len(filt) + 1):
        for s in range(r + 1, len(filt) + 1):
            ir, is_ = eff.info[r], eff.info[s]
            if ir.kind in ("zero", "exponential", "constant") or is_.kind in ("zero", "exponential", "constant"):
                continue
            hr_ = filt.path_height(ir.suffix)
            hs_ = filt.path_height(is_.suffix)
            if hr_ == hs_ and ir.kind == "nonlinear" and is_.kind == "linear":
                return EfficiencyCertificate(False, strata, f"strata {r},{s}: Nielsen suffix sorted above non-Nielsen")
    return EfficiencyCertificate(True, strata)
