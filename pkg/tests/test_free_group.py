import random

import pytest
from hypothesis import given, strategies as st

from fgorbit.free_group import (
    Automorphism,
    canonical_cyclic,
    concat,
    cyclic_reduce,
    inverse_word,
    is_conjugate,
    power_of,
    primitive_root,
    reduce_word,
    subst,
)


def second_reducer(letters):
    """Independent oracle: repeatedly delete adjacent cancelling pairs."""
    word = list(letters)
    done = False
    while not done:
        done = True
        for i in range(len(word) - 1):
            if word[i] == -word[i + 1]:
                del word[i:i + 2]
                done = False
                break
    return tuple(word)


def letters(rank=3):
    return st.lists(st.integers(-rank, rank).filter(lambda a: a != 0), max_size=30)


GOLDEN = Automorphism(2, [(1, 2), (1,)])


class TestReduce:
    def test_full_cancellation(self):
        assert reduce_word([1, 2, -2, -1]) == ()

    def test_already_reduced(self):
        assert reduce_word([1, 2, -1]) == (1, 2, -1)

    def test_single_cancellation(self):
        assert reduce_word([1, -1, 1]) == (1,)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            reduce_word([1, 4], rank=3)

    @given(letters())
    def test_matches_second_reducer(self, ls):
        assert reduce_word(ls) == second_reducer(ls)

    @given(letters())
    def test_idempotent_and_shorter(self, ls):
        w = reduce_word(ls)
        assert reduce_word(w) == w
        assert len(w) <= len(ls)


class TestApply:
    def test_direct_substitution(self):
        assert GOLDEN.apply((1,)) == (1, 2)

    def test_substitution_with_reduction(self):
        assert GOLDEN.apply((1, 2)) == (1, 2, 1)

    def test_third_iterate(self):
        # iterate apply three times: a -> ab -> aba -> abaab
        w = (1,)
        for _ in range(3):
            w = GOLDEN.apply(w)
        assert w == (1, 2, 1, 1, 2)
        assert GOLDEN.apply_power((1,), 3) == w

    def test_rank_mismatch(self):
        with pytest.raises(ValueError):
            GOLDEN.apply((3,))


class TestInvert:
    def test_identity(self):
        ident = Automorphism.identity(3)
        assert ident.inverse() == ident

    def test_golden(self):
        psi = GOLDEN.inverse()
        # verify by direct composition both ways
        assert GOLDEN.compose(psi).is_identity()
        assert psi.compose(GOLDEN).is_identity()
        assert psi.images == ((2,), (-2, 1))

    def test_dehn_twist(self):
        phi = Automorphism(2, [(1,), (2, 1, 1)])
        psi = phi.inverse()
        assert psi.images == ((1,), (2, -1, -1))
        assert phi.compose(psi).is_identity()

    def test_rejects_non_surjective(self):
        with pytest.raises(ValueError):
            Automorphism(2, [(1, 1), (2,)])
        with pytest.raises(ValueError):
            Automorphism(1, [(1, 1)])

    def test_rejects_non_injective_tuple(self):
        with pytest.raises(ValueError):
            Automorphism(2, [(1,), (1,)])


class TestCompose:
    def test_identity_neutral(self):
        ident = Automorphism.identity(2)
        assert ident.compose(GOLDEN) == GOLDEN
        assert GOLDEN.compose(ident) == GOLDEN

    def test_golden_squared(self):
        sq = GOLDEN.compose(GOLDEN)
        assert sq.images == ((1, 2, 1), (1, 2))

    def test_inverse_law(self):
        assert GOLDEN.compose(GOLDEN.inverse()).is_identity()

    def test_action_order(self):
        # apply(compose(phi, psi), w) = psi(phi(w))
        rng = random.Random(7)
        autos = [GOLDEN, GOLDEN.inverse(), Automorphism(2, [(2,), (1,)])]
        for _ in range(25):
            phi = rng.choice(autos)
            psi = rng.choice(autos)
            w = tuple(rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 8)))
            w = reduce_word(w)
            assert phi.compose(psi).apply(w) == psi.apply(phi.apply(w))


class TestCyclicReduce:
    def test_conjugated_generator(self):
        assert cyclic_reduce((2, 1, -2)) == ((1,), (2,))

    def test_already_cyclically_reduced(self):
        assert cyclic_reduce((1,)) == ((1,), ())

    def test_deeper_strip(self):
        core, conj = cyclic_reduce((-2, 1, 2, -1, 2))
        assert core == tuple(reduce_word(core))
        assert not (len(core) >= 2 and core[0] == -core[-1])
        assert concat(conj, core, inverse_word(conj)) == (-2, 1, 2, -1, 2)


class TestConjugacy:
    def test_rotation(self):
        c = is_conjugate((1, 2), (2, 1))
        assert c is not None
        assert concat(inverse_word(c), (1, 2), c) == (2, 1)

    def test_distinct_generators(self):
        assert is_conjugate((1,), (2,)) is None

    def test_rotation_search(self):
        u, v = (1, 1, 2), (1, 2, 1)
        c = is_conjugate(u, v)
        assert c is not None
        assert concat(inverse_word(c), u, c) == v

    @given(letters(), letters())
    def test_certificate_or_distinct_classes(self, a, b):
        u, v = reduce_word(a), reduce_word(b)
        c = is_conjugate(u, v)
        if c is not None:
            assert concat(inverse_word(c), u, c) == v
        else:
            assert canonical_cyclic(u) != canonical_cyclic(v)


class TestFreeProductExtend:
    def test_identity(self):
        assert Automorphism.identity(1).free_product_extend() == Automorphism.identity(2)

    def test_golden(self):
        ext = GOLDEN.free_product_extend()
        assert ext.images == ((1, 2), (1,), (3,))

    def test_action_on_marked_words(self):
        ext = GOLDEN.free_product_extend()
        rng = random.Random(3)
        for _ in range(20):
            w = reduce_word([rng.choice([1, -1, 2, -2]) for _ in range(6)])
            assert ext.apply(w + (3,)) == GOLDEN.apply(w) + (3,)


class TestMisc:
    def test_primitive_root(self):
        assert primitive_root((1, 2, 1, 2)) == ((1, 2), 2)
        assert primitive_root((1, 2)) == ((1, 2), 1)

    def test_power_of(self):
        assert power_of((1, 2, 1, 2), (1, 2)) == 2
        assert power_of((-2, -1, -2, -1), (1, 2)) == -2
        assert power_of((1, 2, 1), (1, 2)) is None
        assert power_of((), (1, 2)) == 0

    def test_is_inner(self):
        w = (1, 2, -1)
        phi = Automorphism(2, [subst([(w and (-2, 1, 2)) or (), (2,)], (i,)) for i in (1, 2)])
        conj = Automorphism(2, [concat(inverse_word((1, 2)), (i,), (1, 2)) for i in (1, 2)])
        c = conj.is_inner()
        assert c is not None
        assert all(concat(inverse_word(c), (i,), c) == conj.images[i - 1] for i in (1, 2))
        assert GOLDEN.is_inner() is None

    def test_random_compositions_invertible(self):
        rng = random.Random(11)
        for _ in range(30):
            phi = Automorphism.identity(3)
            for _ in range(rng.randint(0, 6)):
                kind = rng.randrange(3)
                i, j = rng.sample(range(1, 4), 2)
                if kind == 0:
                    images = [(k,) if k not in (i, j) else ((j,) if k == i else (i,)) for k in range(1, 4)]
                elif kind == 1:
                    images = [(k,) if k != i else (-i,) for k in range(1, 4)]
                else:
                    images = [(k,) if k != i else reduce_word((i, j)) for k in range(1, 4)]
                phi = phi.compose(Automorphism(3, images))
            # re-validate through the public constructor, then invert
            phi2 = Automorphism(3, phi.images)
            assert phi2.compose(phi2.inverse()).is_identity()
