"""Tests for the exact privacy auditor and the statistical checks."""
from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations

import pytest

from mpir import audit
from mpir.params import Params, lj_mj
from mpir.prob import build_prob_table


def F(*args):
    return Fraction(*args)


class TestSupportDistribution:
    def test_worked_value_for_every_demand(self):
        params = Params(K=4, D=2)
        table = build_prob_table(params)
        for w in combinations(range(1, 5), 2):
            dist = audit.support_distribution(params, table, w, 1)
            assert dist[frozenset({3, 4})] == F(1, 18)

    def test_empty_support_probability(self):
        # P(zero query at one server) = (1/N) * sum_j l_j * P[0][j].
        params = Params(K=4, D=2)
        table = build_prob_table(params)
        l, _ = lj_mj(params.D)
        expected = sum(F(l[j]) * table.P[0][j] for j in range(params.D)) / params.N
        for w in ((1, 2), (2, 4), (3, 4)):
            dist = audit.support_distribution(params, table, w, 2)
            assert dist[frozenset()] == expected == F(1, 9)

    def test_total_mass_is_one(self):
        params = Params(K=5, D=2)
        table = build_prob_table(params)
        dist = audit.support_distribution(params, table, (2, 5), 1)
        assert sum(dist.values()) == 1

    def test_same_for_every_server_position(self):
        params = Params(K=5, D=3)
        table = build_prob_table(params)
        dists = [
            audit.support_distribution(params, table, (1, 3, 5), n)
            for n in range(1, params.N + 1)
        ]
        assert all(d == dists[0] for d in dists)

    def test_rejects_bad_server(self):
        params = Params(K=4, D=2)
        table = build_prob_table(params)
        with pytest.raises(ValueError):
            audit.support_distribution(params, table, (1, 2), 4)


class TestPrivacyCheck:
    @pytest.mark.parametrize("K,D", [(4, 2), (5, 2), (6, 3)])
    def test_passes_exactly(self, K, D):
        report = audit.privacy_check(Params(K=K, D=D))
        assert report.passed
        assert report.max_tv_distance == 0
        assert report.violations == ()

    def test_mutated_table_fails(self):
        params = Params(K=4, D=2)
        table = build_prob_table(params)
        report = audit.privacy_check(params, audit.perturb_prob_table(table, 1, 2))
        assert not report.passed
        assert report.max_tv_distance > 0
        v = report.violations[0]
        assert v.p != v.p_ref

    def test_every_single_entry_mutation_detected(self):
        params = Params(K=4, D=2)
        table = build_prob_table(params)
        for i in range(3):
            for j in (1, 2):
                mutated = audit.perturb_prob_table(table, i, j)
                assert not audit.privacy_check(params, mutated).passed

    def test_skipping_permutation_fails(self):
        params = Params(K=4, D=2)
        report = audit.privacy_check(params, permute=False)
        assert not report.passed
        assert report.max_tv_distance > 0


class TestCoefficientPrivacy:
    @pytest.mark.parametrize("K,D,q", [(4, 2, 3), (5, 2, 3), (4, 2, 5)])
    def test_exact_equality_at_small_instances(self, K, D, q):
        # Settles the question left open by the support-level reduction: even
        # with the full-rank conditioning, the coefficient-vector
        # distribution is exactly demand-independent at these instances.
        report = audit.coefficient_privacy_check(Params(K=K, D=D, q=q))
        assert report.passed
        assert report.max_tv_distance == 0

    def test_distribution_mass(self):
        params = Params(K=4, D=2, q=3)
        table = build_prob_table(params)
        dist = audit.coefficient_distribution(params, table, (1, 2), 1)
        assert sum(dist.values()) == 1
        # The zero vector appears exactly when the empty-support row is drawn.
        assert dist[(0, 0, 0, 0)] == F(1, 9)

    def test_mutation_detected_at_coefficient_level(self):
        params = Params(K=4, D=2, q=3)
        table = build_prob_table(params)
        report = audit.coefficient_privacy_check(params, audit.perturb_prob_table(table, 0, 1))
        assert not report.passed

    def test_oversized_instance_rejected(self):
        with pytest.raises(ValueError, match="too large"):
            audit.coefficient_distribution(
                Params(K=12, D=2, q=13),
                build_prob_table(Params(K=12, D=2, q=13)),
                (1, 2),
                1,
                max_work=1000,
            )


class TestPerturbProbTable:
    def test_mass_remains_one(self):
        from mpir.params import binomial

        params = Params(K=5, D=2)
        table = build_prob_table(params)
        mutated = audit.perturb_prob_table(table, 2, 1)
        l, _ = lj_mj(params.D)
        mass = sum(
            binomial(3, i) * sum(l[j] * mutated.P[i][j] for j in range(2))
            for i in range(4)
        )
        assert mass == 1
        assert mutated.P != table.P


class TestEvenness:
    @pytest.mark.parametrize("D", range(2, 9))
    def test_passes(self, D):
        report = audit.evenness_check(D)
        assert report.passed
        assert len(report.findings) == D

    def test_known_lex_first_findings(self):
        report = audit.evenness_check(7)
        uneven = {f.j for f in report.findings if not f.lex_first_even}
        assert uneven == {3, 4, 5}


class TestRecoverability:
    def test_small_run_all_succeed(self):
        params = Params(K=4, D=2, m=8)
        report = audit.recoverability_check(params, 2000, random.Random(101))
        assert report.passed
        assert report.successes == report.trials == 2000
        assert report.within_3_sigma

    def test_larger_instance(self):
        params = Params(K=9, D=3, m=8)
        report = audit.recoverability_check(params, 500, random.Random(5))
        assert report.passed

    def test_expected_matches_rate_module(self):
        params = Params(K=4, D=2, m=8)
        report = audit.recoverability_check(params, 10, random.Random(0))
        assert report.expected_answering == F(8, 3)

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            audit.recoverability_check(Params(K=4, D=2), 0, random.Random(0))
