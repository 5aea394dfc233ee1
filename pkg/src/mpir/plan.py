"""The query-plan table: row indexing, subset machinery, and row sampling.

A plan table for demand set W has one row per tuple (i, k, j, l):

* sub-table i in 0..K-D fixes how many non-demand messages are mixed in;
* block k picks which i-subset of the complement of W that is;
* sub-block j in 1..D fixes how many demand messages each answering server
  adds on top;
* row l in 1..l_j picks one j-subset T of W from a fixed collection, and the
  row's N supports are R, R + shift(T, 1), ..., R + shift(T, D).

Rows are never materialized as a whole table; everything is reconstructed on
demand from the tuple.  The collection of j-subsets backing each sub-block
must satisfy an evenness property (every j-subset of W appears exactly m_j
times across the l_j x D shifted columns); that property is load-bearing for
privacy, so it is searched for and verified here instead of assumed.
"""
from __future__ import annotations

import logging
import math
import random
from functools import lru_cache
from itertools import combinations
from typing import Iterable, NamedTuple

from .params import Params, binomial, lj_mj
from .prob import ProbTable

logger = logging.getLogger(__name__)


class EvennessError(Exception):
    """No collection of distinct j-subsets can satisfy the evenness property."""


class RowId(NamedTuple):
    """Row address (sub-table, block, sub-block, row); k, j, l are 1-based."""

    i: int
    k: int
    j: int
    l: int


SupportRow = tuple[frozenset[int], ...]


def as_demand(params: Params, W: Iterable[int]) -> tuple[int, ...]:
    """Normalize W to a sorted tuple of D distinct indices in [1, K]."""
    w = tuple(sorted(set(W)))
    if len(w) != params.D:
        raise ValueError(f"demand must contain exactly D={params.D} distinct indices")
    if w[0] < 1 or w[-1] > params.K:
        raise ValueError(f"demand indices must lie in [1, {params.K}]")
    return w


def complement(params: Params, W: Iterable[int]) -> tuple[int, ...]:
    """Sorted message indices outside the demand."""
    w = set(W)
    return tuple(x for x in range(1, params.K + 1) if x not in w)


def r_subset(params: Params, W: Iterable[int], i: int, k: int) -> tuple[int, ...]:
    """The k-th i-subset of [K] \\ W in lexicographic order (k is 1-based)."""
    if not 0 <= i <= params.K - params.D:
        raise ValueError(f"i must be in [0, {params.K - params.D}], got {i}")
    pool = complement(params, as_demand(params, W))
    if not 1 <= k <= binomial(len(pool), i):
        raise ValueError(f"k must be in [1, {binomial(len(pool), i)}], got {k}")
    # Combinatorial unranking: at each slot, skip over the blocks of
    # combinations that start with earlier pool elements.
    idx = k - 1
    out: list[int] = []
    start = 0
    for slots_left in range(i, 0, -1):
        for pos in range(start, len(pool)):
            block = binomial(len(pool) - pos - 1, slots_left - 1)
            if idx < block:
                out.append(pool[pos])
                start = pos + 1
                break
            idx -= block
    return tuple(out)


def shift_subset(W: Iterable[int], T: Iterable[int], h: int) -> frozenset[int]:
    """Advance each element of T by h-1 positions, cyclically within sorted W."""
    w = tuple(sorted(W))
    D = len(w)
    if not 1 <= h <= D:
        raise ValueError(f"h must be in [1, {D}], got {h}")
    pos = {x: r for r, x in enumerate(w)}
    out = set()
    for x in T:
        if x not in pos:
            raise ValueError(f"{x} is not a demand element")
        out.add(w[(pos[x] + h - 1) % D])
    return frozenset(out)


def _orbit(positions: frozenset[int], D: int) -> frozenset[frozenset[int]]:
    return frozenset(frozenset((p + d) % D for p in positions) for d in range(D))


def _position_candidates(D: int, j: int) -> tuple[tuple[int, ...], ...]:
    # All j-subsets of positions 0..D-1 containing position 0, in lex order.
    return tuple(c for c in combinations(range(D), j) if c[0] == 0)


def _positions_even(collection: Iterable[tuple[int, ...]], D: int, j: int, mj: int) -> bool:
    counts: dict[frozenset[int], int] = {}
    for cand in collection:
        for d in range(D):
            s = frozenset((p + d) % D for p in cand)
            counts[s] = counts.get(s, 0) + 1
    return all(counts.get(frozenset(s), 0) == mj for s in combinations(range(D), j))


@lru_cache(maxsize=None)
def lex_first_positions_even(D: int, j: int) -> bool:
    """Whether the first l_j candidate subsets already satisfy evenness.

    This is the naive 'take any l_j subsets' reading; it fails for some
    (D, j), e.g. D=7 with j=3, which is why the chosen collection below is
    built per cyclic-shift orbit instead.
    """
    l, m = lj_mj(D)
    return _positions_even(_position_candidates(D, j)[: l[j - 1]], D, j, m[j - 1])


@lru_cache(maxsize=None)
def _chosen_positions(D: int, j: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically least even collection, found by orbit quotas.

    A candidate's D cyclic shifts cover its shift-orbit, hitting each orbit
    member stab times (stab = D / orbit size).  Evenness therefore holds
    exactly when each orbit contributes m_j / stab chosen candidates, so a
    greedy pass over candidates in lex order, capped per orbit, yields the
    lexicographically least feasible collection directly.
    """
    l, m = lj_mj(D)
    lj, mj = l[j - 1], m[j - 1]
    quotas: dict[frozenset[frozenset[int]], int] = {}
    chosen: list[tuple[int, ...]] = []
    for cand in _position_candidates(D, j):
        orbit = _orbit(frozenset(cand), D)
        stab = D // len(orbit)
        if mj % stab != 0:
            raise EvennessError(
                f"no even collection exists for D={D}, j={j}: an orbit with "
                f"stabilizer {stab} cannot meet multiplicity {mj}"
            )
        quota = quotas.setdefault(orbit, mj // stab)
        if quota > 0:
            quotas[orbit] = quota - 1
            chosen.append(cand)
            if len(chosen) == lj:
                break
    if len(chosen) != lj or not _positions_even(chosen, D, j, mj):
        raise EvennessError(f"even collection search failed for D={D}, j={j}")
    if not lex_first_positions_even(D, j):
        logger.info(
            "evenness finding: the first %d candidate %d-subsets are uneven for "
            "D=%d; substituted the orbit-balanced collection",
            lj,
            j,
            D,
        )
    return tuple(chosen)


def choose_T_collection(params: Params, W: Iterable[int], j: int) -> tuple[frozenset[int], ...]:
    """The l_j distinct j-subsets of W (each containing min W) used by sub-block j.

    Deterministic: depends only on (D, j) in position space, then mapped onto
    the sorted elements of W.  Raises EvennessError if no even collection of
    distinct subsets exists at all.
    """
    w = as_demand(params, W)
    if not 1 <= j <= params.D:
        raise ValueError(f"j must be in [1, {params.D}], got {j}")
    return tuple(frozenset(w[p] for p in cand) for cand in _chosen_positions(params.D, j))


def verify_evenness(
    params: Params, W: Iterable[int], j: int, collection: Iterable[Iterable[int]]
) -> tuple[dict[frozenset[int], int], bool]:
    """Multiplicity of every j-subset of W across all shifted columns.

    Returns the full multiplicity map (zero entries included) and whether
    every j-subset attains exactly m_j.
    """
    w = as_demand(params, W)
    _, m = lj_mj(params.D)
    counts = {frozenset(s): 0 for s in combinations(w, j)}
    for T in collection:
        for h in range(1, params.D + 1):
            s = shift_subset(w, T, h)
            if s not in counts:
                raise ValueError(f"{set(T)} is not a {j}-subset of the demand")
            counts[s] += 1
    return counts, all(c == m[j - 1] for c in counts.values())


def row_supports(params: Params, W: Iterable[int], row: RowId) -> SupportRow:
    """The N supports (S_1, ..., S_N) of one table row.

    S_1 is the complement subset alone; server column 1+h adds the h-shifted
    demand subset on top.
    """
    w = as_demand(params, W)
    _validate_row(params, row)
    base = frozenset(r_subset(params, w, row.i, row.k))
    T = choose_T_collection(params, w, row.j)[row.l - 1]
    return (base,) + tuple(base | shift_subset(w, T, h) for h in range(1, params.D + 1))


def _validate_row(params: Params, row: RowId) -> None:
    l, _ = lj_mj(params.D)
    if not 0 <= row.i <= params.K - params.D:
        raise ValueError(f"row sub-table {row.i} out of range")
    if not 1 <= row.k <= binomial(params.K - params.D, row.i):
        raise ValueError(f"row block {row.k} out of range for sub-table {row.i}")
    if not 1 <= row.j <= params.D:
        raise ValueError(f"row sub-block {row.j} out of range")
    if not 1 <= row.l <= l[row.j - 1]:
        raise ValueError(f"row index {row.l} out of range for sub-block {row.j}")


def total_rows(params: Params) -> int:
    """Number of rows in the full table: 2^(K-D) * sum_j l_j."""
    l, _ = lj_mj(params.D)
    return 2 ** (params.K - params.D) * sum(l)


def iter_row_ids(params: Params) -> Iterable[RowId]:
    """All row addresses in table order."""
    l, _ = lj_mj(params.D)
    for i in range(params.K - params.D + 1):
        for k in range(1, binomial(params.K - params.D, i) + 1):
            for j in range(1, params.D + 1):
                for row_l in range(1, l[j - 1] + 1):
                    yield RowId(i, k, j, row_l)


@lru_cache(maxsize=None)
def _sampling_layout(
    params: Params, prob: ProbTable
) -> tuple[int, tuple[tuple[int, int, int, int, int], ...]]:
    # Integer row weights over one common denominator, grouped by (i, j).
    # Group order is fixed so sampling is reproducible for a given seed.
    l, _ = lj_mj(params.D)
    den = math.lcm(*(p.denominator for row in prob.P for p in row))
    groups = []
    total = 0
    for i in range(params.K - params.D + 1):
        k_count = binomial(params.K - params.D, i)
        for j in range(1, params.D + 1):
            p = prob.P[i][j - 1]
            num = p.numerator * (den // p.denominator)
            groups.append((i, j, k_count, l[j - 1], num))
            total += k_count * l[j - 1] * num
    if total != den:
        raise ValueError("probability table mass is not exactly 1")
    return den, tuple(groups)


def sample_row(params: Params, prob: ProbTable, W: Iterable[int], rng: random.Random) -> RowId:
    """Draw one row id with probability P[i][j], uniform across k and l.

    The draw compares a uniform 128-bit integer against exact integer
    thresholds over the table's common denominator, so no floating point can
    bias the privacy-critical selection.
    """
    as_demand(params, W)
    den, groups = _sampling_layout(params, prob)
    target = (rng.getrandbits(128) * den) >> 128
    acc = 0
    for i, j, k_count, l_count, num in groups:
        width = k_count * l_count * num
        if target < acc + width:
            offset = (target - acc) // num
            return RowId(i, offset // l_count + 1, j, offset % l_count + 1)
        acc += width
    raise AssertionError("sampling target beyond total mass")
