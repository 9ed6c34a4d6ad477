import random
from fractions import Fraction

import pytest

from fgorbit.free_group import Automorphism
from fgorbit.graph_map import (
    Graph,
    GraphMap,
    Marking,
    canonical_circuit,
    classify,
    cyclic_tighten,
    prefix_power,
    rose_map,
    tighten,
)


GOLDEN = rose_map(Automorphism(2, [(1, 2), (1,)]))


def random_path(graph, rng, length):
    v = rng.choice(graph.vertices)
    out = []
    for _ in range(length):
        options = [d for d in graph.directions_at(v) if not out or d != -out[-1]]
        if not options:
            break
        d = rng.choice(options)
        out.append(d)
        v = graph.term(d)
    return tuple(out)


class TestTighten:
    def test_edge_then_reverse(self):
        assert tighten((1, -1)) == ()

    def test_inner_cancellation(self):
        assert tighten((1, 2, -2, 1)) == (1, 1)

    def test_path_times_reverse(self):
        rng = random.Random(0)
        for _ in range(30):
            p = random_path(GOLDEN.graph, rng, rng.randint(0, 10))
            back = tuple(-d for d in reversed(p))
            assert tighten(p + back) == ()

    def test_idempotent(self):
        rng = random.Random(1)
        for _ in range(30):
            raw = tuple(rng.choice([1, -1, 2, -2]) for _ in range(12))
            assert tighten(tighten(raw)) == tighten(raw)


class TestMapPath:
    def test_single_edge(self):
        assert GOLDEN.map_path((1,)) == (1, 2)

    def test_substitute_and_tighten(self):
        # a b^-1: image = ab . a^-1 -> a b a^-1
        assert GOLDEN.map_path((1, -2)) == (1, 2, -1)

    def test_iterate(self):
        assert GOLDEN.map_path((1,), 3) == (1, 2, 1, 1, 2)

    def test_composition_law(self):
        rng = random.Random(2)
        for _ in range(25):
            p = random_path(GOLDEN.graph, rng, rng.randint(0, 8))
            j, k = rng.randint(0, 3), rng.randint(0, 3)
            assert GOLDEN.map_path(GOLDEN.map_path(p, j), k) == GOLDEN.map_path(p, j + k)

    def test_circuit(self):
        ident = rose_map(Automorphism.identity(2))
        assert ident.map_circuit((1, 2)) == canonical_circuit((1, 2))
        assert GOLDEN.map_circuit((1,)) == (1, 2)

    def test_circuit_requires_closed(self):
        g = Graph([0, 1], {1: 0, -1: 1})
        gm = GraphMap(g, {0: 0, 1: 1}, {1: (1,)}, check=False)
        with pytest.raises(ValueError):
            gm.map_circuit((1,))


class TestFiltration:
    def test_golden_single_exponential(self):
        filt = GOLDEN.filtration
        assert len(filt) == 1
        s = filt.stratum(1)
        assert s.kind == "exponential"
        assert s.matrix == ((1, 1), (1, 0))
        lo, hi = s.lam
        assert lo <= Fraction(161803, 100000) <= hi
        assert hi - lo < Fraction(1, 100)

    def test_two_nonexponential_strata(self):
        gm = rose_map(Automorphism(2, [(1,), (2, 1)]))
        filt = gm.filtration
        assert len(filt) == 2
        assert [s.kind for s in filt.strata] == ["nonexponential", "nonexponential"]
        assert filt.strata[0].edges == (1,)

    def test_permutation_single_stratum(self):
        gm = rose_map(Automorphism(2, [(2,), (1,)]))
        filt = gm.filtration
        assert len(filt) == 1
        assert filt.stratum(1).kind == "nonexponential"

    def test_invariance(self):
        rng = random.Random(3)
        for images in [[(1, 2), (1,)], [(1,), (2, 1)], [(2,), (1,)], [(1, 2, -1), (1,)]]:
            gm = rose_map(Automorphism(2, images))
            filt = gm.filtration
            for e in gm.graph.edges:
                r = filt.edge_height(e)
                for d in gm.edge_image[e]:
                    assert filt.edge_height(d) <= r


class TestClassify:
    def test_fibonacci_matrix(self):
        kind, (lo, hi) = classify(((1, 1), (1, 0)))
        assert kind == "exponential"
        golden_ratio = Fraction(1618033988, 10 ** 9)
        assert lo - Fraction(1, 100) <= golden_ratio <= hi + Fraction(1, 100)
        assert lo > 1

    def test_permutation(self):
        kind, lam = classify(((0, 1), (1, 0)))
        assert kind == "nonexponential"
        assert lam == (1, 1)

    def test_zero(self):
        assert classify(((0, 0), (0, 0)))[0] == "zero"

    def test_power_interval_excludes_one(self):
        for mat in [((1, 1), (1, 0)), ((2,),), ((0, 1, 1), (1, 0, 1), (1, 1, 0))]:
            kind, (lo, hi) = classify(mat)
            assert kind == "exponential"
            assert lo > 1


class TestTurns:
    def test_golden_illegal_turn(self):
        # Df(a) = a, Df(b) = a: the turn {a, b} degenerates in one step
        assert GOLDEN.turn_image((1, 2)) == (1, 1)
        assert not GOLDEN.is_legal_turn((1, 2))

    def test_golden_legal_turn(self):
        # {a^-1, b} -> {b^-1, a} -> {a^-1, a}? iterate: never degenerate
        assert GOLDEN.is_legal_turn((-1, 2))

    def test_degenerate_illegal(self):
        assert not GOLDEN.is_legal_turn((1, 1))

    def test_unique_illegal_turn_of_golden(self):
        g = GOLDEN.graph
        illegal = []
        for i, a in enumerate(g.directions_at(0)):
            for b in g.directions_at(0)[i + 1:]:
                if not GOLDEN.is_legal_turn((a, b)):
                    illegal.append((a, b))
        assert illegal == [(1, 2)]

    def test_legality_preserved_by_Df(self):
        g = GOLDEN.graph
        for v in g.vertices:
            dirs = g.directions_at(v)
            for i, a in enumerate(dirs):
                for b in dirs[i:]:
                    if a != b and GOLDEN.is_legal_turn((a, b)):
                        assert GOLDEN.is_legal_turn(GOLDEN.turn_image((a, b)))


class TestRLegal:
    def test_single_edge(self):
        assert GOLDEN.iota_r((1,), 1) == 0

    def test_ab_legal(self):
        # a.b crosses the turn {a^-1, b}: legal
        assert GOLDEN.iota_r((1, 2), 1) == 0

    def test_inverse_a_then_b_illegal(self):
        # a^-1.b crosses {a, b}: the unique illegal turn
        assert GOLDEN.iota_r((-1, 2), 1) == 1
        assert not GOLDEN.is_r_legal((-1, 2), 1)

    def test_max_run(self):
        assert GOLDEN.max_r_legal_run((1, 2, -1, 2), 1) >= 2


class TestMarking:
    def test_rose_roundtrip(self):
        w = (1, 2, -1)
        circ = GOLDEN.circuit_for(w)
        back = GOLDEN.word_for(circ)
        from fgorbit.free_group import canonical_cyclic

        assert back == canonical_cyclic(w)

    def test_circuit_for_generator(self):
        assert GOLDEN.circuit_for((1,)) == (1,)

    def test_image_circuit_class(self):
        from fgorbit.free_group import canonical_cyclic

        circ = GOLDEN.circuit_for((1,))
        img = GOLDEN.map_circuit(circ)
        assert GOLDEN.word_for(img) == canonical_cyclic((1, 2))

    def test_roundtrip_random(self):
        from fgorbit.free_group import canonical_cyclic, reduce_word

        rng = random.Random(5)
        for _ in range(50):
            w = reduce_word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 9))])
            assert GOLDEN.word_for(GOLDEN.circuit_for(w)) == canonical_cyclic(w)

    def test_induced_automorphism(self):
        phi = GOLDEN.induced_automorphism
        assert phi.images == ((1, 2), (1,))

    def test_Q_bound(self):
        from fgorbit.free_group import canonical_cyclic, reduce_word

        rng = random.Random(6)
        Q = GOLDEN.Q
        for _ in range(40):
            w = reduce_word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(1, 9))])
            cw = canonical_cyclic(w)
            if not cw:
                continue
            circ = GOLDEN.circuit_for(cw)
            assert len(cw) <= Q * max(len(circ), 1)
            assert len(circ) <= Q * len(cw)


class TestPrefixPower:
    def test_powers(self):
        assert prefix_power((1,), (1, 1, 1, 2)) == 3
        assert prefix_power((1,), (2, 1)) == 0
        assert prefix_power((1, 2), (1, 2, 1, 2, 1)) == 2


class TestPower:
    def test_power_map(self):
        sq = GOLDEN.power(2)
        assert sq.edge_image[1] == (1, 2, 1)
        assert sq.edge_image[2] == (1, 2)
        assert sq.filtration.stratum(1).kind == "exponential"
