"""Row-selection probabilities, download rate, and capacity formulas.

The sampling probabilities P[i][j] are pinned down by two facts: privacy
forces every row vector P_i to equal M applied to P_{i+1}, and the total
mass condition sum_i k_i * sum_j l_j * P[i][j] = 1 must hold.  Subject to
those, the free final row P_{K-D} is chosen to maximize the expected number
of silent servers.  That optimization is a one-constraint box LP whose
optimum sits on a single coordinate, so it is solved in closed form here
rather than with a numeric solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .params import (
    Params,
    RationalVector,
    binomial,
    build_M,
    compute_FG,
    lj_mj,
    mat_vec_mul,
)


@dataclass(frozen=True)
class ProbTable:
    """Row-selection probabilities P[i][j-1] for i in 0..K-D, j in 1..D.

    j_star is the column carrying the single nonzero entry of the last row.
    """

    P: tuple[tuple[Fraction, ...], ...]
    j_star: int

    def entry(self, i: int, j: int) -> Fraction:
        """P_{i,j} with 1-based sub-block index j."""
        return self.P[i][j - 1]


@dataclass(frozen=True)
class RateReport:
    """Achievable rate versus capacity bounds, all exact."""

    rate: Fraction
    upper_bound: Fraction
    capacity_if_divisible: Fraction | None
    gap: Fraction
    expected_download_factor: Fraction


def solve_opt(F: RationalVector, G: RationalVector) -> tuple[int, Fraction]:
    """Maximize f_j / g_j; returns (1-based argmax, max value).

    Ties break toward the smallest j so the construction is reproducible.
    """
    if len(F) != len(G) or not F:
        raise ValueError("F and G must be nonempty vectors of equal length")
    if any(g <= 0 for g in G):
        raise ValueError("all entries of G must be positive")
    j_star, best = 1, F[0] / G[0]
    for j in range(2, len(F) + 1):
        v = F[j - 1] / G[j - 1]
        if v > best:
            j_star, best = j, v
    return j_star, best


def build_prob_table(params: Params) -> ProbTable:
    """Construct the optimal probability table for one protocol instance.

    The last row puts mass 1/g_{j*} on column j*, and each earlier row is M
    times its successor.  The result is validated: every entry must land in
    [0, 1] and the total mass must be exactly 1; a violation means the
    construction itself is broken, so it raises rather than clamps.
    """
    K, D = params.K, params.D
    F, G = compute_FG(params)
    j_star, _ = solve_opt(F, G)
    top = Fraction(1) / G[j_star - 1]
    if top > 1:
        raise ValueError(
            f"1/g_{j_star} = {top} exceeds 1; the box constraint binds, which the "
            "closed-form optimum does not support"
        )
    M = build_M(D)
    rows: list[tuple[Fraction, ...]] = [
        tuple(top if j == j_star else Fraction(0) for j in range(1, D + 1))
    ]
    for _ in range(K - D):
        rows.append(mat_vec_mul(M, rows[-1]))
    rows.reverse()
    l, _ = lj_mj(D)
    for i, row in enumerate(rows):
        for j, p in enumerate(row, start=1):
            if not 0 <= p <= 1:
                raise ValueError(f"P[{i}][{j}] = {p} outside [0, 1]")
    mass = sum(
        binomial(K - D, i) * sum(l[j] * rows[i][j] for j in range(D))
        for i in range(K - D + 1)
    )
    if mass != 1:
        raise ValueError(f"total row mass is {mass}, expected exactly 1")
    return ProbTable(P=tuple(rows), j_star=j_star)


def achievable_rate(params: Params) -> Fraction:
    """Download rate D / (N - max_j f_j/g_j) of the randomized construction."""
    _, value = solve_opt(*compute_FG(params))
    return Fraction(params.D) / (params.N - value)


def expected_download_factor(params: Params, table: ProbTable) -> Fraction:
    """Expected number of answering servers, N - sum_j l_j P[0][j].

    Multiplying by the per-answer size B gives the expected download; dividing
    D by this factor reproduces the rate through an independent path.
    """
    l, _ = lj_mj(params.D)
    return params.N - sum(Fraction(l[j]) * table.P[0][j] for j in range(params.D))


def _bound_ratio_form(params: Params) -> Fraction:
    # Tight regime: D >= K/2.
    K, D, N = params.K, params.D, params.N
    return 1 / (1 + Fraction(K - D, D * N))


def _bound_geometric_form(params: Params) -> Fraction:
    # Tight regime: D <= K/2.
    K, D, N = params.K, params.D, params.N
    whole = K // D
    frac = Fraction(K, D) - whole
    inv_pow = Fraction(1, N**whole)
    return 1 / ((1 - inv_pow) / (1 - Fraction(1, N)) + frac * inv_pow)


def capacity_upper_bound(params: Params) -> Fraction:
    """Capacity upper bound, dispatching on the demand density.

    Uses the ratio form when D >= K/2 and the geometric-sum form when
    D <= K/2; at D = K/2 both apply and must agree.
    """
    if 2 * params.D == params.K:
        a, b = _bound_ratio_form(params), _bound_geometric_form(params)
        assert a == b, f"boundary formulas disagree: {a} != {b}"
        return a
    if 2 * params.D > params.K:
        return _bound_ratio_form(params)
    return _bound_geometric_form(params)


def capacity_divisible(params: Params) -> Fraction:
    """Exact capacity (1 - 1/N) / (1 - 1/N^(K/D)), defined only when D | K."""
    K, D, N = params.K, params.D, params.N
    if K % D != 0:
        raise ValueError(f"capacity formula requires D | K, got K={K}, D={D}")
    levels = K // D
    cap = (1 - Fraction(1, N)) / (1 - Fraction(1, N**levels))
    alt = Fraction(D) / (N - Fraction(1, (D + 1) ** (levels - 1)))
    assert cap == alt, f"equivalent capacity forms disagree: {cap} != {alt}"
    return cap


def rate_report(params: Params) -> RateReport:
    """Rate, bounds, and gap for one instance, cross-checked two ways.

    The rate computed from the weight-vector optimum must equal the rate
    implied by row 0 of the probability table; any difference is a bug.
    """
    rate = achievable_rate(params)
    table = build_prob_table(params)
    factor = expected_download_factor(params, table)
    via_table = Fraction(params.D) / factor
    assert rate == via_table, f"rate paths disagree: {rate} != {via_table}"
    upper = capacity_upper_bound(params)
    cap = capacity_divisible(params) if params.K % params.D == 0 else None
    return RateReport(
        rate=rate,
        upper_bound=upper,
        capacity_if_divisible=cap,
        gap=upper - rate,
        expected_download_factor=factor,
    )
