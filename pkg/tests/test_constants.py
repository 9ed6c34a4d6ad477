import random
from fractions import Fraction

from fgorbit.constants import bundle, compose_maps, homotopy_inverse, size
from fgorbit.cover import CoverTree
from fgorbit.free_group import Automorphism
from fgorbit.graph_map import rose_map, tighten


GOLDEN = rose_map(Automorphism(2, [(1, 2), (1,)]))
IDENT = rose_map(Automorphism.identity(2))


def random_tight_path(graph, rng, length, start):
    v = start
    out = []
    for _ in range(length):
        options = [d for d in graph.directions_at(v) if not out or d != -out[-1]]
        if not options:
            break
        d = rng.choice(options)
        out.append(d)
        v = graph.term(d)
    return tuple(out)


class TestSize:
    def test_identity(self):
        assert size(IDENT) == 1

    def test_golden(self):
        assert size(GOLDEN) == 2

    def test_golden_squared(self):
        assert size(GOLDEN.power(2)) == 3


class TestHomotopyInverse:
    def test_identity(self):
        g = homotopy_inverse(IDENT)
        assert g.induced_automorphism.is_identity()

    def test_golden(self):
        g = homotopy_inverse(GOLDEN)
        assert g.induced_automorphism == GOLDEN.induced_automorphism.inverse()

    def test_composite_is_trivial_outer(self):
        g = homotopy_inverse(GOLDEN)
        vi, ei = compose_maps(GOLDEN, g)
        # the composite induces the identity on loops at the base vertex
        for L in GOLDEN.marking.loops:
            pieces = []
            for d in L:
                img = ei[d] if d > 0 else tuple(-x for x in reversed(ei[-d]))
                pieces.extend(img)
            word = GOLDEN.word_for_path(tighten(pieces))
            assert word == GOLDEN.word_for_path(L)


class TestBundle:
    def test_identity_bundle(self):
        b = bundle(IDENT)
        assert b.S_f == 1 and b.S_g == 1
        assert b.B_fg == 2  # 1 + B + S with B = 0, S = 1
        assert b.K == 1
        assert b.D_f == 4
        assert b.C_f == 7

    def test_monotonicity(self):
        for gm in (IDENT, GOLDEN):
            b = bundle(gm)
            assert b.C_f >= b.S_g
            assert b.C_f > 0 and b.C_g > 0

    def test_C_low(self):
        assert bundle(IDENT).C_low == 1 * (1 + 2)
        assert bundle(GOLDEN).C_low == 2 * (1 + 2)


class TestQuasiIsometry:
    def test_double_inequality(self):
        rng = random.Random(9)
        for gm in (IDENT, GOLDEN):
            b = bundle(gm)
            cover = CoverTree(gm, 0)
            pts = [cover.ensure_path(random_tight_path(gm.graph, rng, rng.randint(0, 7), 0)) for _ in range(40)]
            for _ in range(200):
                x, y = rng.choice(pts), rng.choice(pts)
                d = cover.distance(x, y)
                df = cover.distance(cover.lift_image(x), cover.lift_image(y))
                assert Fraction(d, b.K) - b.D_f <= df <= b.K * d + b.D_f


class TestBoundedCancellation:
    def test_common_prefix_bound(self):
        rng = random.Random(10)
        for gm in (IDENT, GOLDEN):
            b = bundle(gm)
            cover = CoverTree(gm, 0)
            count = 0
            while count < 200:
                alpha = random_tight_path(gm.graph, rng, rng.randint(1, 7), 0)
                beta = random_tight_path(gm.graph, rng, rng.randint(1, 7), 0)
                if alpha[0] == beta[0]:
                    continue
                count += 1
                u = cover.ensure_path(alpha)
                v = cover.ensure_path(beta)
                overlap = len(cover.wedge(cover.lift_image(u), cover.lift_image(v)))
                assert overlap <= b.C_f

    def test_B_bound_sampled(self):
        rng = random.Random(11)
        gm = GOLDEN
        b = bundle(gm)
        g = homotopy_inverse(gm)
        vi, ei = compose_maps(gm, g)
        from fgorbit.constants import _CompositeMap

        comp = _CompositeMap(gm.graph, vi, ei)
        cover = CoverTree(comp, g.marking.base)
        for _ in range(100):
            p = random_tight_path(gm.graph, rng, rng.randint(0, 6), 0)
            key = cover.ensure_path(p)
            assert len(cover.displacement(key)) <= b.B_fg
