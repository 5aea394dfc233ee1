"""Exhaustive privacy verification and statistical protocol checks.

The privacy auditor does not reuse the analysis that motivated the
probability table; it enumerates every row of every demand set's plan table
and tallies, per server position, the exact probability of each query
support.  Privacy holds iff those distributions are identical (rational
equality, not approximate) across all C(K, D) demand sets.
"""
from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable

from . import gf, plan
from .params import Params, binomial, lj_mj
from .prob import ProbTable, build_prob_table, expected_download_factor
from .protocol import MessageStore, run_round

SupportDistribution = dict[frozenset[int], Fraction]


def _column_support_counts(
    params: Params, W: tuple[int, ...]
) -> dict[tuple[int, int], dict[frozenset[int], list[int]]]:
    """Per (i, j): how often each support shows up in each of the N columns."""
    comp = plan.complement(params, W)
    counts: dict[tuple[int, int], dict[frozenset[int], list[int]]] = {}
    for i in range(params.K - params.D + 1):
        for j in range(1, params.D + 1):
            per_support: dict[frozenset[int], list[int]] = defaultdict(
                lambda: [0] * params.N
            )
            collection = plan.choose_T_collection(params, W, j)
            shifted = [
                [plan.shift_subset(W, T, h) for h in range(1, params.D + 1)]
                for T in collection
            ]
            for base in combinations(comp, i):
                base_f = frozenset(base)
                for row_shifts in shifted:
                    per_support[base_f][0] += 1
                    for h, T_h in enumerate(row_shifts, start=1):
                        per_support[base_f | T_h][h] += 1
            counts[(i, j)] = dict(per_support)
    return counts


def _distribution_from_counts(
    params: Params,
    prob: ProbTable,
    counts: dict[tuple[int, int], dict[frozenset[int], list[int]]],
    server_n: int,
    permute: bool,
) -> SupportDistribution:
    dist: SupportDistribution = defaultdict(Fraction)
    for (i, j), per_support in counts.items():
        p = prob.P[i][j - 1]
        if p == 0:
            continue
        for sup, by_col in per_support.items():
            weight = sum(by_col) * p / params.N if permute else by_col[server_n - 1] * p
            if weight:
                dist[sup] += weight
    return dict(dist)


def support_distribution(
    params: Params,
    prob: ProbTable,
    W: Iterable[int],
    server_n: int,
    permute: bool = True,
) -> SupportDistribution:
    """Exact distribution of the query support seen by one server position.

    Every row id is enumerated and weighted by its selection probability.
    With permute=True each of a row's N columns reaches server n with
    probability 1/N (the uniform-permutation marginal); permute=False models
    a broken client that always sends column n to server n, which is what
    the permutation-skip mutation check exercises.
    """
    w = plan.as_demand(params, W)
    if not 1 <= server_n <= params.N:
        raise ValueError(f"server position must be in [1, {params.N}]")
    counts = _column_support_counts(params, w)
    return _distribution_from_counts(params, prob, counts, server_n, permute)


@dataclass(frozen=True)
class PrivacyViolation:
    W_ref: tuple[int, ...]
    W: tuple[int, ...]
    server_n: int
    support: frozenset[int]
    p_ref: Fraction
    p: Fraction


@dataclass(frozen=True)
class PrivacyReport:
    params: Params
    passed: bool
    max_tv_distance: Fraction
    demands_checked: int
    violations: tuple[PrivacyViolation, ...]


def privacy_check(
    params: Params, prob: ProbTable | None = None, permute: bool = True
) -> PrivacyReport:
    """Compare the support distribution across all demand sets, exactly.

    Reports the maximum total-variation distance between any demand set's
    distribution and the reference (first) demand set, per server position.
    A correct construction yields distance exactly 0; any nonzero entry is
    returned as a violation.
    """
    if prob is None:
        prob = build_prob_table(params)
    demands = [tuple(c) for c in combinations(range(1, params.K + 1), params.D)]
    reference: list[SupportDistribution] | None = None
    w_ref: tuple[int, ...] = demands[0]
    max_tv = Fraction(0)
    violations: list[PrivacyViolation] = []
    for w in demands:
        counts = _column_support_counts(params, w)
        dists = [
            _distribution_from_counts(params, prob, counts, n, permute)
            for n in range(1, params.N + 1)
        ]
        if reference is None:
            reference = dists
            continue
        for n, (ref, cur) in enumerate(zip(reference, dists), start=1):
            tv = Fraction(0)
            for sup in set(ref) | set(cur):
                p_ref = ref.get(sup, Fraction(0))
                p = cur.get(sup, Fraction(0))
                if p_ref != p:
                    violations.append(
                        PrivacyViolation(
                            W_ref=w_ref, W=w, server_n=n, support=sup, p_ref=p_ref, p=p
                        )
                    )
                tv += abs(p_ref - p)
            max_tv = max(max_tv, tv / 2)
    return PrivacyReport(
        params=params,
        passed=not violations,
        max_tv_distance=max_tv,
        demands_checked=len(demands),
        violations=tuple(violations),
    )


def perturb_prob_table(
    prob: ProbTable, i: int, j: int, delta: Fraction = Fraction(1, 1000)
) -> ProbTable:
    """A deliberately broken table: one entry nudged, then mass renormalized.

    The result intentionally bypasses construction-time validation; it exists
    so tests and the CLI can confirm the privacy auditor actually detects
    broken probability assignments.
    """
    rows = [list(r) for r in prob.P]
    rows[i][j - 1] += delta
    D = len(rows[0])
    l, _ = lj_mj(D)
    k_top = len(rows) - 1
    mass = sum(
        binomial(k_top, idx) * sum(l[c] * rows[idx][c] for c in range(D))
        for idx in range(len(rows))
    )
    scaled = tuple(tuple(p / mass for p in row) for row in rows)
    return ProbTable(P=scaled, j_star=prob.j_star)


@dataclass(frozen=True)
class CoefficientPrivacyReport:
    params: Params
    passed: bool
    max_tv_distance: Fraction
    demands_checked: int


def coefficient_distribution(
    params: Params,
    prob: ProbTable,
    W: Iterable[int],
    server_n: int,
    max_work: int = 5_000_000,
) -> dict[tuple[int, ...], Fraction]:
    """Exact distribution of the full coefficient vector at one server.

    Enumerates every row, every mixing-vector assignment, and every
    full-rank demand-vector assignment, under the uniform permutation
    marginal.  Exponential in the supports, so only desk-scale instances are
    accepted; the point is to settle coefficient-level privacy exactly where
    enumeration is feasible rather than to scale.
    """
    w = plan.as_demand(params, W)
    if not 1 <= server_n <= params.N:
        raise ValueError(f"server position must be in [1, {params.N}]")
    field = gf.PrimeField(params.q)
    nz = range(1, params.q)
    base_work = (params.q - 1) ** (params.K - params.D)
    v_work = max(
        (params.q - 1) ** (j * params.D) for j in range(1, params.D + 1)
    )
    if plan.total_rows(params) * base_work * (params.D + 1) + v_work > max_work:
        raise ValueError("instance too large for exact coefficient enumeration")

    v_choices_cache: dict[tuple[int, int], list[tuple[gf.FieldVector, ...]]] = {}

    def v_choices(j: int, l: int) -> list[tuple[gf.FieldVector, ...]]:
        if (j, l) not in v_choices_cache:
            T = plan.choose_T_collection(params, w, j)[l - 1]
            shifts = [sorted(plan.shift_subset(w, T, h)) for h in range(1, params.D + 1)]
            found = []
            for assign in product(*(list(product(nz, repeat=len(s))) for s in shifts)):
                vecs = tuple(
                    gf.vector_with_support(params.K, dict(zip(s, vals)))
                    for s, vals in zip(shifts, assign)
                )
                if gf.matrix_rank(field, vecs) == params.D:
                    found.append(vecs)
            v_choices_cache[(j, l)] = found
        return v_choices_cache[(j, l)]

    dist: dict[tuple[int, ...], Fraction] = defaultdict(Fraction)
    for row in plan.iter_row_ids(params):
        p_row = prob.P[row.i][row.j - 1]
        if p_row == 0:
            continue
        base = sorted(plan.r_subset(params, w, row.i, row.k))
        choices = v_choices(row.j, row.l)
        scale = p_row / (params.N * (params.q - 1) ** len(base) * len(choices))
        for u_vals in product(nz, repeat=len(base)):
            U = gf.vector_with_support(params.K, dict(zip(base, u_vals)))
            for vecs in choices:
                dist[U] += scale
                for v in vecs:
                    dist[field.vec_add(U, v)] += scale
    return dict(dist)


def coefficient_privacy_check(
    params: Params, prob: ProbTable | None = None, max_work: int = 5_000_000
) -> CoefficientPrivacyReport:
    """Compare the exact coefficient-vector distribution across demand sets.

    A strictly stronger check than the support-level one: it accounts for the
    full-rank conditioning of the demand vectors, which the support argument
    abstracts away.
    """
    if prob is None:
        prob = build_prob_table(params)
    demands = [tuple(c) for c in combinations(range(1, params.K + 1), params.D)]
    reference = None
    max_tv = Fraction(0)
    passed = True
    for w in demands:
        dists = [
            coefficient_distribution(params, prob, w, n, max_work=max_work)
            for n in range(1, params.N + 1)
        ]
        if reference is None:
            reference = dists
            continue
        for ref, cur in zip(reference, dists):
            tv = sum(
                abs(ref.get(k, Fraction(0)) - cur.get(k, Fraction(0)))
                for k in set(ref) | set(cur)
            ) / 2
            max_tv = max(max_tv, tv)
            passed &= tv == 0
    return CoefficientPrivacyReport(
        params=params, passed=passed, max_tv_distance=max_tv, demands_checked=len(demands)
    )


@dataclass(frozen=True)
class EvennessFinding:
    j: int
    lex_first_even: bool


@dataclass(frozen=True)
class EvennessReport:
    D: int
    passed: bool
    multiplicities: tuple[int, ...]
    findings: tuple[EvennessFinding, ...]


def evenness_check(D: int) -> EvennessReport:
    """Verify the chosen j-subset collections for every sub-block size.

    Also records, per j, whether the naive lexicographically-first choice of
    l_j subsets would have satisfied evenness; those data points are genuine
    findings (the property does not hold for arbitrary choices).
    """
    params = Params(K=D + 1, D=D)
    W = tuple(range(1, D + 1))
    _, m = lj_mj(D)
    findings = []
    passed = True
    for j in range(1, D + 1):
        collection = plan.choose_T_collection(params, W, j)
        _, ok = plan.verify_evenness(params, W, j, collection)
        passed &= ok
        findings.append(
            EvennessFinding(j=j, lex_first_even=plan.lex_first_positions_even(D, j))
        )
    return EvennessReport(D=D, passed=passed, multiplicities=m, findings=tuple(findings))


@dataclass(frozen=True)
class RecoverabilityReport:
    params: Params
    trials: int
    successes: int
    mean_answering: Fraction
    expected_answering: Fraction
    std_error: float
    within_3_sigma: bool

    @property
    def passed(self) -> bool:
        return self.successes == self.trials


def recoverability_check(
    params: Params, trials: int, rng: random.Random
) -> RecoverabilityReport:
    """Run full rounds against fresh random stores and random demands.

    Every round must recover the demand exactly; the report also compares the
    empirical number of answering servers against its exact expectation.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    prob = build_prob_table(params)
    expected = expected_download_factor(params, prob)
    silent_p = params.N - expected  # probability that a round has a silent server
    successes = 0
    answering_total = 0
    for _ in range(trials):
        store = MessageStore.random(params, rng)
        w = tuple(sorted(rng.sample(range(1, params.K + 1), params.D)))
        transcript = run_round(params, prob, w, store, rng)
        truth = tuple(store.messages[x - 1] for x in w)
        if transcript.recovered == truth:
            successes += 1
        answering_total += transcript.download_elements // params.m
    mean = Fraction(answering_total, trials)
    std_error = math.sqrt(float(silent_p * (1 - silent_p)) / trials)
    within = abs(float(mean - expected)) <= 3 * std_error
    return RecoverabilityReport(
        params=params,
        trials=trials,
        successes=successes,
        mean_answering=mean,
        expected_answering=expected,
        std_error=std_error,
        within_3_sigma=within,
    )
