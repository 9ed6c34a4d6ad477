"""Brute-force oracles and seeded instance generators for cross-checking.

The oracles use only word arithmetic and direct path iteration, staying
independent of the train track pipeline they certify.
"""

from __future__ import annotations

import random
from typing import Iterator, Optional, Sequence

from .free_group import Automorphism, canonical_cyclic, reduce_word
from .graph_map import GraphMap


def brute_orbit(phi: Automorphism, u: Sequence[int], v: Sequence[int], n_max: int = 12) -> Optional[int]:
    """Least N <= n_max with u phi^N = v, scanning directly."""
    u = reduce_word(u, phi.rank)
    v = reduce_word(v, phi.rank)
    cur = u
    for n in range(n_max + 1):
        if cur == v:
            return n
        cur = phi.apply(cur)
    return None


def brute_conj_orbit(phi: Automorphism, u: Sequence[int], v: Sequence[int], n_max: int = 12) -> Optional[int]:
    """Least N <= n_max with u phi^N conjugate to v."""
    target = canonical_cyclic(v)
    cur = reduce_word(u, phi.rank)
    for n in range(n_max + 1):
        if canonical_cyclic(cur) == target:
            return n
        cur = phi.apply(cur)
    return None


def brute_nielsen(gm: GraphMap, rho: Sequence[int], k_max: int = 12) -> Optional[int]:
    """Least period p <= k_max with rho f^p = rho."""
    rho = tuple(rho)
    cur = rho
    for p in range(1, k_max + 1):
        cur = gm.map_path(cur)
        if cur == rho:
            return p
    return None


def elementary_moves(rank: int) -> list:
    """The generator moves: swaps, inversions, one-sided multiplications."""
    out = []
    for i in range(1, rank + 1):
        out.append([(-k,) if k == i else (k,) for k in range(1, rank + 1)])
        for j in range(1, rank + 1):
            if i == j:
                continue
            out.append([(j,) if k == i else ((i,) if k == j else (k,)) for k in range(1, rank + 1)])
            out.append([(i, j) if k == i else (k,) for k in range(1, rank + 1)])
            out.append([(j, i) if k == i else (k,) for k in range(1, rank + 1)])
    return out


def gen(rank: int, depth: int, seed: int, count: Optional[int] = None) -> Iterator[Automorphism]:
    """Deterministic stream of automorphisms built from elementary moves."""
    rng = random.Random(seed)
    moves = elementary_moves(rank)
    produced = 0
    while count is None or produced < count:
        phi = Automorphism.identity(rank)
        for _ in range(rng.randint(0, depth)):
            phi = phi.compose(Automorphism(rank, rng.choice(moves), _trusted=True))
        yield phi
        produced += 1


def random_word(rng: random.Random, rank: int, max_len: int):
    letters = [a for i in range(1, rank + 1) for a in (i, -i)]
    return reduce_word([rng.choice(letters) for _ in range(rng.randint(0, max_len))], rank)
