"""Tests for prime-field arithmetic and the small linear solvers."""
from __future__ import annotations

import random
from itertools import product

import pytest

from mpir import gf
from mpir.params import Params


class TestFieldOps:
    def test_add_wraps(self):
        assert gf.PrimeField(3).add(2, 2) == 1

    def test_inverse(self):
        assert gf.PrimeField(3).inv(2) == 2

    def test_mul(self):
        assert gf.PrimeField(5).mul(3, 4) == 2

    def test_zero_inverse_rejected(self):
        with pytest.raises(ZeroDivisionError):
            gf.PrimeField(5).inv(0)

    def test_nonprime_rejected(self):
        with pytest.raises(ValueError):
            gf.PrimeField(9)

    @pytest.mark.parametrize("q", [2, 3, 5, 7])
    def test_axioms_exhaustive(self, q):
        field = gf.PrimeField(q)
        for a, b, c in product(range(q), repeat=3):
            assert field.add(field.add(a, b), c) == field.add(a, field.add(b, c))
            assert field.mul(field.mul(a, b), c) == field.mul(a, field.mul(b, c))
            assert field.mul(a, field.add(b, c)) == field.add(field.mul(a, b), field.mul(a, c))
        for a in range(1, q):
            assert field.mul(a, field.inv(a)) == 1
        for a in range(q):
            assert field.add(a, field.neg(a)) == 0

    @pytest.mark.parametrize("q", [11, 13])
    def test_axioms_sampled(self, q):
        field = gf.PrimeField(q)
        rng = random.Random(q)
        for _ in range(500):
            a, b, c = (rng.randrange(q) for _ in range(3))
            assert field.mul(a, field.add(b, c)) == field.add(field.mul(a, b), field.mul(a, c))
            assert field.add(field.add(a, b), c) == field.add(a, field.add(b, c))


class TestSupport:
    def test_support_indices_are_one_based(self):
        assert gf.support((0, 2, 0, 1)) == frozenset({2, 4})
        assert gf.support((0, 0)) == frozenset()

    def test_vector_with_support(self):
        assert gf.vector_with_support(4, {3: 1, 4: 2}) == (0, 0, 1, 2)


class TestSolvers:
    def test_identity(self):
        field = gf.PrimeField(5)
        eye = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
        assert gf.solve_square(field, eye, (4, 2, 3)) == (4, 2, 3)

    def test_diagonal(self):
        field = gf.PrimeField(3)
        assert gf.solve_square(field, [[2, 0], [0, 1]], (1, 2)) == (2, 2)

    def test_singular_rejected(self):
        field = gf.PrimeField(5)
        with pytest.raises(ValueError, match="singular"):
            gf.solve_square(field, [[1, 2], [2, 4]], (1, 1))

    def test_against_exhaustive_search(self):
        # Oracle: try all 125 candidate solutions over GF(5)^3.
        field = gf.PrimeField(5)
        rng = random.Random(17)
        for _ in range(20):
            mat = [[rng.randrange(5) for _ in range(3)] for _ in range(3)]
            if gf.matrix_rank(field, mat) < 3:
                continue
            b = tuple(rng.randrange(5) for _ in range(3))
            brute = [
                x
                for x in product(range(5), repeat=3)
                if all(sum(mat[r][c] * x[c] for c in range(3)) % 5 == b[r] for r in range(3))
            ]
            assert len(brute) == 1
            assert gf.solve_square(field, mat, b) == brute[0]

    def test_round_trip(self):
        rng = random.Random(23)
        field = gf.PrimeField(7)
        for _ in range(50):
            mat = [[rng.randrange(7) for _ in range(4)] for _ in range(4)]
            if gf.matrix_rank(field, mat) < 4:
                continue
            x = tuple(rng.randrange(7) for _ in range(4))
            b = tuple(sum(mat[r][c] * x[c] for c in range(4)) % 7 for r in range(4))
            assert gf.solve_square(field, mat, b) == x

    def test_solve_multi_matches_columnwise(self):
        field = gf.PrimeField(5)
        rng = random.Random(31)
        mat = [[rng.randrange(5) for _ in range(3)] for _ in range(3)]
        while gf.matrix_rank(field, mat) < 3:
            mat = [[rng.randrange(5) for _ in range(3)] for _ in range(3)]
        rhs_rows = [[rng.randrange(5) for _ in range(6)] for _ in range(3)]
        combined = gf.solve_multi(field, mat, rhs_rows)
        for c in range(6):
            col = tuple(rhs_rows[r][c] for r in range(3))
            single = gf.solve_square(field, mat, col)
            assert tuple(combined[t][c] for t in range(3)) == single


class TestMatrixRank:
    def test_known_ranks(self):
        field = gf.PrimeField(3)
        assert gf.matrix_rank(field, [[1, 2], [2, 2]]) == 2
        assert gf.matrix_rank(field, [[1, 2], [2, 4]]) == 1
        assert gf.matrix_rank(field, [[1, 2], [2, 1]]) == 1  # det = -3 = 0 mod 3
        assert gf.matrix_rank(field, [[0, 0], [0, 0]]) == 0
        assert gf.matrix_rank(field, []) == 0


class TestRandomFullRankV:
    def test_disjoint_supports(self):
        params = Params(K=4, D=2, q=3)
        rng = random.Random(1)
        vecs = gf.random_full_rank_V(params, [{1}, {2}], rng)
        assert gf.support(vecs[0]) == frozenset({1})
        assert gf.support(vecs[1]) == frozenset({2})
        assert gf.matrix_rank(gf.PrimeField(3), vecs) == 2

    def test_overlapping_supports_reject_proportional(self):
        # Oracle: of the 16 nonzero-entry pairs on {1,2}, exactly 8 are full
        # rank over GF(3); the draw must always land among those.
        params = Params(K=4, D=2, q=3)
        field = gf.PrimeField(3)
        full_rank = 0
        for a1, a2, b1, b2 in product((1, 2), repeat=4):
            v1 = (a1, a2, 0, 0)
            v2 = (b1, b2, 0, 0)
            full_rank += gf.matrix_rank(field, [v1, v2]) == 2
        assert full_rank == 8
        rng = random.Random(99)
        for _ in range(200):
            vecs = gf.random_full_rank_V(params, [{1, 2}, {1, 2}], rng)
            assert gf.matrix_rank(field, vecs) == 2
            assert all(vecs[t][idx] != 0 for t in range(2) for idx in (0, 1))

    @pytest.mark.parametrize("q", [3, 5])
    def test_rank_for_both_small_primes(self, q):
        params = Params(K=5, D=2, q=q)
        rng = random.Random(q)
        for _ in range(100):
            vecs = gf.random_full_rank_V(params, [{2, 4}, {2, 4}], rng)
            assert gf.matrix_rank(gf.PrimeField(q), vecs) == 2

    def test_empty_support_rejected(self):
        params = Params(K=4, D=2, q=3)
        with pytest.raises(ValueError):
            gf.random_full_rank_V(params, [set(), {1}], random.Random(0))
