"""Words and automorphisms of finitely generated free groups.

A word in F_n is a tuple of nonzero integers: the letter ``i`` with
``1 <= i <= n`` is the i-th generator and ``-i`` its inverse.  All words
handed around by this module are freely reduced.

Automorphisms act on the right, matching the exponent notation ``u . phi^N``
used throughout the package: ``apply(phi, w)`` is ``w`` followed by ``phi``,
and ``compose(phi, psi)`` applies ``phi`` first.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

Word = tuple  # tuple of nonzero ints


def reduce_word(letters: Iterable[int], rank: Optional[int] = None) -> Word:
    """Freely reduce a letter sequence.

    >>> reduce_word([1, 2, -2, -1])
    ()
    >>> reduce_word([1, -1, 1])
    (1,)
    """
    out: list[int] = []
    for a in letters:
        if a == 0:
            raise ValueError("letter 0 is not a generator")
        if rank is not None and abs(a) > rank:
            raise ValueError(f"generator index {a} out of range for rank {rank}")
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def inverse_word(w: Sequence[int]) -> Word:
    return tuple(-a for a in reversed(w))


def concat(*words: Sequence[int]) -> Word:
    """Concatenate and freely reduce."""
    out: list[int] = []
    for w in words:
        for a in w:
            if out and out[-1] == -a:
                out.pop()
            else:
                out.append(a)
    return tuple(out)


def subst(images: Sequence[Sequence[int]], w: Sequence[int]) -> Word:
    """Apply the endomorphism ``x_i -> images[i-1]`` to ``w`` and reduce."""
    out: list[int] = []
    for a in w:
        img = images[a - 1] if a > 0 else inverse_word(images[-a - 1])
        for b in img:
            if out and out[-1] == -b:
                out.pop()
            else:
                out.append(b)
    return tuple(out)


def cyclic_reduce(w: Sequence[int]) -> tuple[Word, Word]:
    """Return ``(core, conj)`` with ``w = conj core conj^-1``, core cyclically reduced.

    >>> cyclic_reduce((2, 1, -2))
    ((1,), (2,))
    """
    w = reduce_word(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return tuple(w[i:j]), tuple(w[:i])


def _min_rotation(w: Sequence[int]) -> tuple[Word, int]:
    if not w:
        return tuple(w), 0
    n = len(w)
    doubled = list(w) + list(w)
    best = 0
    for i in range(1, n):
        if doubled[i:i + n] < doubled[best:best + n]:
            best = i
    return tuple(doubled[best:best + n]), best


def canonical_cyclic(w: Sequence[int]) -> Word:
    """Canonical representative of the conjugacy class of ``w``."""
    core, _ = cyclic_reduce(w)
    rot, _ = _min_rotation(core)
    return rot


def is_conjugate(u: Sequence[int], v: Sequence[int]) -> Optional[Word]:
    """Return a conjugator ``c`` with ``c^-1 u c = v``, or None.

    >>> is_conjugate((1, 2), (2, 1))
    (1,)
    >>> is_conjugate((1,), (2,)) is None
    True
    """
    cu, pu = cyclic_reduce(u)
    cv, pv = cyclic_reduce(v)
    if len(cu) != len(cv):
        return None
    if not cu:
        return ()
    n = len(cu)
    doubled = cu + cu
    for t in range(n):
        if doubled[t:t + n] == cv:
            # rot_t(cu) = s^-1 cu s with s = cu[:t]
            return concat(pu, cu[:t], inverse_word(pv))
    return None


def primitive_root(w: Sequence[int]) -> tuple[Word, int]:
    """Smallest ``t`` with ``w = t^m`` as a literal concatenation; returns (t, m)."""
    w = tuple(w)
    n = len(w)
    if n == 0:
        return (), 1
    for d in range(1, n + 1):
        if n % d == 0 and w[:d] * (n // d) == w:
            return w[:d], n // d
    return w, 1


def power_of(w: Sequence[int], t: Sequence[int]) -> Optional[int]:
    """If ``w = t^m`` for an integer m (possibly negative or 0), return m."""
    w, t = tuple(w), tuple(t)
    if not t:
        return 0 if not w else None
    if not w:
        return 0
    for base in (t, inverse_word(t)):
        if len(w) % len(base) == 0:
            m = len(w) // len(base)
            if base * m == w:
                return m if base == t else -m
    return None


def _fold_is_basis(rank: int, images: Sequence[Word]) -> bool:
    """Stallings fold of the wedge of image loops; True iff the core is the rank-n rose."""
    if len(images) != rank:
        return False
    parent = [0]

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    def new_vertex() -> int:
        parent.append(len(parent))
        return len(parent) - 1

    edges: set[tuple[int, int, int]] = set()
    for w in images:
        if not w:
            return False
        cur = 0
        for k, a in enumerate(w):
            nxt = 0 if k == len(w) - 1 else new_vertex()
            if a > 0:
                edges.add((cur, nxt, a))
            else:
                edges.add((nxt, cur, -a))
            cur = nxt
    while True:
        merged = False
        out_map: dict[tuple[int, int], int] = {}
        in_map: dict[tuple[int, int], int] = {}
        for (u, v, lab) in edges:
            ru, rv = find(u), find(v)
            if (ru, lab) in out_map:
                if find(out_map[(ru, lab)]) != rv:
                    union(out_map[(ru, lab)], rv)
                    merged = True
            else:
                out_map[(ru, lab)] = rv
            if (rv, lab) in in_map:
                if find(in_map[(rv, lab)]) != ru:
                    union(in_map[(rv, lab)], ru)
                    merged = True
            else:
                in_map[(rv, lab)] = ru
        new_edges = {(find(u), find(v), lab) for (u, v, lab) in edges}
        if not merged and new_edges == edges:
            break
        edges = new_edges
    # trim stems (valence-1 vertices away from the base)
    base = find(0)
    while True:
        deg: dict[int, int] = {}
        for u, v, _ in edges:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        drop = {x for x, d in deg.items() if d == 1 and x != base}
        if not drop:
            break
        edges = {e for e in edges if e[0] not in drop and e[1] not in drop}
    verts = {base} | {u for u, _, _ in edges} | {v for _, v, _ in edges}
    if len(verts) != 1 or len(edges) != rank:
        return False
    return sorted(lab for _, _, lab in edges) == list(range(1, rank + 1))


def _nielsen_invert(rank: int, images: Sequence[Word]) -> Optional[tuple[Word, ...]]:
    """Invert a generator-image tuple by tracked Nielsen reduction.

    Returns the image tuple of the inverse automorphism, or None when the
    reduction cannot reach a signed permutation of the basis.
    """
    W: list[Word] = [tuple(w) for w in images]
    # V[i] tracks the image of x_{i+1} under the composition of moves so far,
    # so that at all times subst(images, V[i]-as-endo...) -- concretely:
    # (original endo) o (moves) has image tuple W, and moves has image tuple V.
    V: list[Word] = [(i + 1,) for i in range(rank)]

    def is_signed_basis(ws: Sequence[Word]) -> bool:
        if any(len(w) != 1 for w in ws):
            return False
        return sorted(abs(w[0]) for w in ws) == list(range(1, rank + 1))

    def moves_from(ws: Sequence[Word], vs: Sequence[Word]):
        for i in range(rank):
            for j in range(rank):
                if i == j:
                    continue
                for inv in (False, True):
                    wj = inverse_word(ws[j]) if inv else tuple(ws[j])
                    vj = inverse_word(vs[j]) if inv else tuple(vs[j])
                    for side in ("r", "l"):
                        cand = concat(ws[i], wj) if side == "r" else concat(wj, ws[i])
                        if len(cand) > len(ws[i]):
                            continue
                        nw = list(ws)
                        nv = list(vs)
                        nw[i] = cand
                        nv[i] = concat(vs[i], vj) if side == "r" else concat(vj, vs[i])
                        yield tuple(nw), tuple(nv), len(cand) < len(ws[i])

    for _ in range(100000):
        if is_signed_basis(W):
            break
        # strictly reducing move if available
        found = False
        for nw, nv, strict in moves_from(W, V):
            if strict:
                W, V = list(nw), list(nv)
                found = True
                break
        if found:
            continue
        # explore the equal-length plateau for an exit
        start = (tuple(W), tuple(V))
        seen = {tuple(W)}
        stack = [start]
        exit_state = None
        while stack and exit_state is None:
            ws, vs = stack.pop()
            for nw, nv, strict in moves_from(ws, vs):
                if strict or is_signed_basis(nw):
                    exit_state = (nw, nv)
                    break
                if nw not in seen:
                    seen.add(nw)
                    stack.append((nw, nv))
        if exit_state is None:
            return None
        W, V = list(exit_state[0]), list(exit_state[1])
    if not is_signed_basis(W):
        return None
    inv_images: list[Word] = [()] * rank
    for i in range(rank):
        a = W[i][0]
        if a > 0:
            inv_images[a - 1] = V[i]
        else:
            inv_images[-a - 1] = inverse_word(V[i])
    return tuple(inv_images)


class Automorphism:
    """An automorphism of F_n given by generator images, validated at construction.

    >>> phi = Automorphism(2, [(1, 2), (1,)])   # a -> ab, b -> a
    >>> phi.apply((1,))
    (1, 2)
    >>> phi.apply((1, 2))
    (1, 2, 1)
    """

    def __init__(self, rank: int, images: Sequence[Sequence[int]], _trusted: bool = False):
        if rank < 1:
            raise ValueError("rank must be at least 1")
        self.rank = rank
        self.images = tuple(reduce_word(w, rank) for w in images)
        if len(self.images) != rank:
            raise ValueError("need one image per generator")
        self._inverse_images: Optional[tuple[Word, ...]] = None
        if not _trusted:
            if not _fold_is_basis(rank, self.images):
                raise ValueError("not an automorphism: folded image graph is not the rose")
            self._inverse_images = self._compute_inverse()

    def _compute_inverse(self) -> tuple[Word, ...]:
        inv = _nielsen_invert(self.rank, self.images)
        if inv is None:
            raise ValueError("not an automorphism: Nielsen reduction found no basis")
        for i in range(self.rank):
            if subst(inv, self.images[i]) != (i + 1,) or subst(self.images, inv[i]) != (i + 1,):
                raise AssertionError("inverse verification failed")
        return inv

    @staticmethod
    def identity(rank: int) -> "Automorphism":
        return Automorphism(rank, [(i + 1,) for i in range(rank)], _trusted=True)

    def apply(self, w: Sequence[int]) -> Word:
        """The right action w . phi."""
        if any(a == 0 or abs(a) > self.rank for a in w):
            raise ValueError("letter out of range for this rank")
        return subst(self.images, w)

    def apply_power(self, w: Sequence[int], k: int) -> Word:
        if k < 0:
            return self.inverse().apply_power(w, -k)
        out = reduce_word(w, self.rank)
        for _ in range(k):
            out = self.apply(out)
        return out

    def compose(self, other: "Automorphism") -> "Automorphism":
        """compose(phi, psi): apply phi first, so (w)(phi psi) = ((w)phi)psi."""
        if self.rank != other.rank:
            raise ValueError("rank mismatch")
        return Automorphism(self.rank, [other.apply(w) for w in self.images], _trusted=True)

    def inverse(self) -> "Automorphism":
        if self._inverse_images is None:
            self._inverse_images = self._compute_inverse()
        psi = Automorphism(self.rank, self._inverse_images, _trusted=True)
        psi._inverse_images = self.images
        return psi

    def power(self, k: int) -> "Automorphism":
        if k < 0:
            return self.inverse().power(-k)
        result = Automorphism.identity(self.rank)
        for _ in range(k):
            result = result.compose(self)
        return result

    def size(self) -> int:
        """Max length of a generator image."""
        return max(len(w) for w in self.images)

    def is_identity(self) -> bool:
        return all(self.images[i] == (i + 1,) for i in range(self.rank))

    def is_inner(self) -> Optional[Word]:
        """Return c with phi(w) = c^-1 w c for all w, or None."""
        n = self.rank
        u = self.images[0]
        d = is_conjugate((1,), u)
        if d is None:
            return None
        if n == 1:
            return d if concat(inverse_word(d), (1,), d) == u else None
        # the centralizer of x_1 is <x_1>, so c = x_1^t d for some t
        bound = len(self.images[1]) + len(d) + 2
        for t in range(-bound, bound + 1):
            c = concat((1,) * t if t >= 0 else (-1,) * (-t), d)
            if all(concat(inverse_word(c), (i + 1,), c) == self.images[i] for i in range(n)):
                return c
        return None

    def free_product_extend(self) -> "Automorphism":
        """Extend to F_{n+1}, fixing the new generator."""
        images = [tuple(w) for w in self.images] + [(self.rank + 1,)]
        return Automorphism(self.rank + 1, images, _trusted=True)

    def __eq__(self, other) -> bool:
        return isinstance(other, Automorphism) and self.rank == other.rank and self.images == other.images

    def __hash__(self) -> int:
        return hash((self.rank, self.images))

    def __repr__(self) -> str:
        return f"Automorphism({self.rank}, {list(self.images)})"


def compose(phi: Automorphism, psi: Automorphism) -> Automorphism:
    return phi.compose(psi)


def apply(phi: Automorphism, w: Sequence[int]) -> Word:
    return phi.apply(w)


def invert(phi: Automorphism) -> Automorphism:
    return phi.inverse()


def free_product_extend(phi: Automorphism) -> Automorphism:
    return phi.free_product_extend()
