"""Protocol parameters and exact rational linear algebra.

Everything here is computed in arbitrary-precision rationals
(:class:`fractions.Fraction`); there is no floating point anywhere in the
analysis path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

RationalVector = tuple[Fraction, ...]
RationalMatrix = tuple[tuple[Fraction, ...], ...]


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def smallest_prime_above(n: int) -> int:
    """Smallest prime strictly greater than n."""
    c = n + 1
    while not is_prime(c):
        c += 1
    return c


@dataclass(frozen=True)
class Params:
    """One protocol instance: K messages, demand size D, N = D+1 servers.

    q is the prime field order (default: smallest prime above D) and m the
    message length in field elements.
    """

    K: int
    D: int
    q: int | None = None
    m: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.K, int) or self.K <= 1:
            raise ValueError(f"K must be an integer > 1, got {self.K!r}")
        if not isinstance(self.D, int) or not 1 < self.D <= self.K:
            raise ValueError(f"D must satisfy 1 < D <= K, got D={self.D!r}, K={self.K}")
        if self.q is None:
            object.__setattr__(self, "q", smallest_prime_above(self.D))
        if not isinstance(self.q, int) or not is_prime(self.q):
            raise ValueError(f"q must be prime, got {self.q!r}")
        if self.q <= self.D:
            raise ValueError(f"q must exceed D, got q={self.q}, D={self.D}")
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m!r}")

    @property
    def N(self) -> int:
        """Server count, always D + 1."""
        return self.D + 1


def binomial(n: int, r: int) -> int:
    """C(n, r), with 0 for r < 0 or r > n."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if r < 0 or r > n:
        return 0
    return math.comb(n, r)


def lj_mj(D: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Row counts l_j and shift multiplicities m_j for j = 1..D.

    l_j is the number of rows a size-j sub-block carries and m_j the
    multiplicity with which each j-subset of the demand must occur among the
    shifted columns of such a sub-block.  Both are exact integers:
    l_j = lcm(C(D,j), D) / D and m_j = D * l_j / C(D,j), so that
    l_j * D == m_j * C(D,j) always.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    l = []
    m = []
    for j in range(1, D + 1):
        c = math.comb(D, j)
        lj = math.lcm(c, D) // D
        l.append(lj)
        m.append(D * lj // c)
    return tuple(l), tuple(m)


def build_L(D: int) -> RationalVector:
    """The row-count vector (l_1, ..., l_D) as rationals."""
    l, _ = lj_mj(D)
    return tuple(Fraction(x) for x in l)


def build_M(D: int) -> RationalMatrix:
    """D x D transition matrix linking consecutive probability rows.

    First row is (l_1, ..., l_D); the sub-diagonal entry in row h+1 is
    m_h / m_{h+1}; everything else is zero.
    """
    l, m = lj_mj(D)
    rows = [[Fraction(0)] * D for _ in range(D)]
    rows[0] = [Fraction(x) for x in l]
    for h in range(1, D):
        rows[h][h - 1] = Fraction(m[h - 1], m[h])
    return tuple(tuple(r) for r in rows)


def vec_mat_mul(vec: RationalVector, mat: RationalMatrix) -> RationalVector:
    """Row vector times matrix, exactly."""
    n = len(mat)
    if len(vec) != n:
        raise ValueError("dimension mismatch")
    return tuple(sum((vec[r] * mat[r][c] for r in range(n)), Fraction(0)) for c in range(n))


def mat_vec_mul(mat: RationalMatrix, vec: RationalVector) -> RationalVector:
    """Matrix times column vector, exactly."""
    n = len(mat)
    if len(vec) != n:
        raise ValueError("dimension mismatch")
    return tuple(sum((mat[r][c] * vec[c] for c in range(n)), Fraction(0)) for r in range(n))


def add_identity(mat: RationalMatrix) -> RationalMatrix:
    """I + M."""
    n = len(mat)
    return tuple(
        tuple(mat[r][c] + (1 if r == c else 0) for c in range(n)) for r in range(n)
    )


def compute_FG(params: Params) -> tuple[RationalVector, RationalVector]:
    """Weight vectors F^T = L^T M^(K-D) and G^T = L^T (I+M)^(K-D).

    Computed as K-D successive row-vector products; the matrix power is never
    materialized, which keeps the integers small even for large K.  Every
    entry of G is strictly positive.
    """
    D = params.D
    L = build_L(D)
    M = build_M(D)
    IM = add_identity(M)
    F, G = L, L
    for _ in range(params.K - D):
        F = vec_mat_mul(F, M)
        G = vec_mat_mul(G, IM)
    return F, G
