"""Orbit decisions: does u phi^N equal (or become conjugate to) v?

The conjugacy decision runs on an efficient representative: the circuit of
u's class either revisits itself (one period of images settles the question)
or provably outgrows every conjugate of v, with exponent bounds computed per
residue class of the represented power.  The element decision reduces to
conjugacy over a free product with one extra generator.  Positive answers
are re-verified by direct application before being returned; negative
answers carry the certified window in ``bounds``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .efficiency import Efficient, compute_efficient
from .free_group import Automorphism, Word, canonical_cyclic, is_conjugate, reduce_word
from .train_track import TrainTrackUnavailable


@dataclass
class OrbitAnswer:
    found: Optional[int]
    direction: str  # 'forward': u phi^N ~ v; 'swapped': v phi^N ~ u
    bounds: dict = field(default_factory=dict)

    @property
    def exponent(self) -> Optional[int]:
        """The exponent N with u phi^N = v (negative when swapped)."""
        if self.found is None:
            return None
        return self.found if self.direction == "forward" else -self.found

    def as_dict(self) -> dict:
        return {
            "found": self.found is not None,
            "N": self.found,
            "direction": self.direction,
            "bounds": {k: v for k, v in self.bounds.items()},
        }


# ---------------------------------------------------------------------------
# circuit growth (Nielsen period or a certified growth exponent)
# ---------------------------------------------------------------------------


def circuit_growth(eff: Efficient, sigma: Sequence[int], L: int) -> tuple:
    """('nielsen', period) or ('growth', k0) with |sigma f^k| > L for all
    k >= k0."""
    from . import nielsen

    gm = eff.gm
    sigma = tuple(sigma)
    if not sigma:
        return ("nielsen", 1)
    p = nielsen.is_periodic_nielsen(eff, sigma, circuit=True)
    if p is not None:
        return ("nielsen", p)
    filt = gm.filtration
    cur = gm.map_circuit(sigma, 0)
    for j in range(4096):
        r = filt.path_height(cur)
        kind = filt.stratum(r).kind
        if kind == "nonexponential":
            return ("growth", j + _circuit_growth_neg(eff, r, cur, L))
        if kind == "zero":
            cur = gm.map_circuit(cur)
            continue
        rot = _legal_fixed_rotation(eff, r, cur)
        if rot is not None:
            k0 = nielsen.growth_exponent(eff, rot, L)
            return ("growth", j + k0)
        cur = gm.map_circuit(cur)
    raise AssertionError("circuit growth iteration guard exceeded")


def _circuit_growth_neg(eff: Efficient, r: int, sigma: tuple, L: int) -> int:
    """Growth exponent of a nonexponential-height circuit via its cyclic
    splitting into basic pieces."""
    from . import nielsen

    gm = eff.gm
    e = gm.filtration.stratum(r).edges[0]
    idx = next(i for i, d in enumerate(sigma) if abs(d) == e)
    rot = sigma[idx:] + sigma[:idx]
    if rot[0] == -e:
        rot = tuple(-x for x in reversed(rot))
    cuts = [0]
    for i, d in enumerate(rot):
        if d == e and i != 0:
            cuts.append(i)
        if d == -e and i + 1 != len(rot):
            cuts.append(i + 1)
    cuts = sorted(set(cuts)) + [len(rot)]
    best = None
    for a, b in zip(cuts, cuts[1:]):
        piece = rot[a:b]
        if piece[0] == -e and piece[-1] != e:
            piece = tuple(-x for x in reversed(piece))
        if nielsen.is_periodic_nielsen(eff, piece) is None:
            k0 = nielsen.growth_exponent(eff, piece, L)
            best = k0 if best is None else min(best, k0)
    assert best is not None, "non-Nielsen circuit with all pieces Nielsen"
    return best


def _legal_fixed_rotation(eff: Efficient, r: int, sigma: tuple) -> Optional[tuple]:
    """A rotation of sigma starting at a fixed vertex whose wrap turn is
    legal: the turn stays nondegenerate under all iterates, so the circuit
    splits there and the rotation can be treated as a fixed-endpoint path."""
    gm = eff.gm
    g = gm.graph
    n = len(sigma)
    for i in range(n):
        v = g.init(sigma[i])
        if gm.vertex_image[v] != v:
            continue
        a, b = -sigma[i - 1], sigma[i]
        if a == b:
            continue
        if gm.is_legal_turn((a, b) if a <= b else (b, a)):
            return tuple(sigma[i:] + sigma[:i])
    return None


# ---------------------------------------------------------------------------
# the conjugacy orbit decision
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _representative(phi: Automorphism) -> tuple:
    """(psi, eff, flipped): an efficient structure for phi or its inverse.

    With psi = phi^-1 the two scan directions exchange roles, since
    u phi^N ~ v iff v psi^N ~ u.
    """
    try:
        return (phi, compute_efficient(phi), False)
    except TrainTrackUnavailable:
        psi = phi.inverse()
        return (psi, compute_efficient(psi), True)


def _directed_window(eff: Efficient, psi: Automorphism, a: Word, b: Word) -> tuple:
    """(window, bounds): a psi^N ~ b is impossible for N >= window."""
    gm = eff.gm
    k = eff.exponent
    Q = gm.Q
    target = canonical_cyclic(b)
    L = math.ceil(Q * max(1, len(target)))
    residues = []
    window = 0
    cur = a
    for s in range(k):
        sigma = gm.circuit_for(canonical_cyclic(cur))
        tag, val = circuit_growth(eff, sigma, L)
        residues.append((s, tag, val))
        window = max(window, s + k * val)
        cur = psi.apply(cur)
    bounds = {
        "k": k,
        "Q": str(Q),
        "L": L,
        "residues": residues,
        "window": window,
    }
    return window, bounds


def _scan(psi: Automorphism, a: Word, b: Word, window: int) -> Optional[int]:
    target = canonical_cyclic(b)
    cur = a
    for N in range(window):
        if canonical_cyclic(cur) == target:
            return N
        cur = psi.apply(cur)
    return None


def conjugacy_orbit(phi: Automorphism, u: Sequence[int], v: Sequence[int]) -> OrbitAnswer:
    """Decide whether some exponent N has u phi^N conjugate to v.

    Nonnegative exponents are reported with direction 'forward'; negative
    ones as direction 'swapped' with found = -N.
    """
    u = reduce_word(u, phi.rank)
    v = reduce_word(v, phi.rank)
    if canonical_cyclic(u) == canonical_cyclic(v):
        return OrbitAnswer(0, "forward", {"trivial": True})
    if not canonical_cyclic(u) or not canonical_cyclic(v):
        return OrbitAnswer(None, "exhausted", {"trivial": True})
    psi, eff, flipped = _representative(phi)
    all_bounds = {}
    for direction, (a, b) in (("forward", (u, v)), ("swapped", (v, u))):
        if flipped:
            # u phi^N ~ v  iff  v psi^N ~ u
            a, b = b, a
        window, bounds = _directed_window(eff, psi, a, b)
        all_bounds[direction] = bounds
        hit = _scan(psi, a, b, window)
        if hit is not None:
            assert is_conjugate(psi.apply_power(a, hit), b) is not None
            return OrbitAnswer(hit, direction, bounds)
    return OrbitAnswer(None, "exhausted", all_bounds)


def element_orbit(phi: Automorphism, u: Sequence[int], v: Sequence[int]) -> OrbitAnswer:
    """Decide whether some exponent N has u phi^N = v, via the free-product
    trick: u phi^N = v iff (uc) psi^N is conjugate to vc over F * <c>."""
    u = reduce_word(u, phi.rank)
    v = reduce_word(v, phi.rank)
    if u == v:
        return OrbitAnswer(0, "forward", {"trivial": True})
    psi = phi.free_product_extend()
    c = (phi.rank + 1,)
    answer = conjugacy_orbit(psi, u + c, v + c)
    if answer.found is None:
        return answer
    if answer.direction == "forward":
        assert phi.apply_power(u, answer.found) == v, "element orbit verification failed"
    else:
        assert phi.apply_power(v, answer.found) == u, "element orbit verification failed"
    return answer
