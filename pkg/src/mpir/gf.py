"""Prime-field arithmetic and small dense linear algebra.

Field elements are plain ints in [0, q); the modulus travels in a
:class:`PrimeField` context object. Vectors over the field are tuples of
ints of length K, entry t holding the coefficient of message t+1.
"""
from __future__ import annotations

import random
from typing import TYPE_CHECKING, Iterable, Sequence

from .params import is_prime

if TYPE_CHECKING:
    from .params import Params

FieldVector = tuple[int, ...]


class PrimeField:
    """Arithmetic context for the field of prime order q."""

    __slots__ = ("q",)

    def __init__(self, q: int):
        if not is_prime(q):
            raise ValueError(f"field order must be prime, got {q}")
        self.q = q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("inverse of zero field element")
        return pow(a, -1, self.q)

    def rand_nonzero(self, rng: random.Random) -> int:
        return rng.randrange(1, self.q)

    def vec_sub(self, a: Sequence[int], b: Sequence[int]) -> FieldVector:
        return tuple((x - y) % self.q for x, y in zip(a, b, strict=True))

    def vec_add(self, a: Sequence[int], b: Sequence[int]) -> FieldVector:
        return tuple((x + y) % self.q for x, y in zip(a, b, strict=True))


def support(vec: Sequence[int]) -> frozenset[int]:
    """1-based indices of the nonzero entries."""
    return frozenset(t + 1 for t, v in enumerate(vec) if v != 0)


def vector_with_support(K: int, entries: dict[int, int]) -> FieldVector:
    """Length-K vector with entries[idx] at each 1-based idx, zero elsewhere."""
    vec = [0] * K
    for idx, val in entries.items():
        vec[idx - 1] = val
    return tuple(vec)


def matrix_rank(field: PrimeField, rows: Iterable[Sequence[int]]) -> int:
    """Rank over the field, by Gaussian elimination."""
    q = field.q
    work = [list(r) for r in rows]
    if not work:
        return 0
    ncols = len(work[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(work)) if work[r][col] % q != 0), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        inv = field.inv(work[rank][col])
        work[rank] = [(x * inv) % q for x in work[rank]]
        for r in range(len(work)):
            if r != rank and work[r][col] % q != 0:
                f = work[r][col]
                work[r] = [(a - f * b) % q for a, b in zip(work[r], work[rank])]
        rank += 1
        if rank == len(work):
            break
    return rank


def solve_square(field: PrimeField, mat: Sequence[Sequence[int]], rhs: Sequence[int]) -> FieldVector:
    """Solve mat @ x = rhs for an invertible square matrix.

    Raises ValueError if the matrix is singular.
    """
    (sol,) = _eliminate(field, mat, [list(rhs)])
    return tuple(sol)


def solve_multi(
    field: PrimeField, mat: Sequence[Sequence[int]], rhs_rows: Sequence[Sequence[int]]
) -> tuple[FieldVector, ...]:
    """Solve mat @ X = RHS column-wise for several right-hand sides at once.

    rhs_rows[h] is the right-hand side row aligned with equation h; the result
    rows are the solved unknowns, each of the same width as the rhs rows.
    """
    n = len(mat)
    width = len(rhs_rows[0])
    cols = [[rhs_rows[h][c] for h in range(n)] for c in range(width)]
    solved = _eliminate(field, mat, cols)
    return tuple(tuple(solved[c][t] for c in range(width)) for t in range(n))


def _eliminate(
    field: PrimeField, mat: Sequence[Sequence[int]], rhs_cols: list[list[int]]
) -> list[list[int]]:
    # Gauss-Jordan with nonzero-pivot selection; mutates copies only.
    q = field.q
    n = len(mat)
    a = [[x % q for x in row] for row in mat]
    if any(len(row) != n for row in a):
        raise ValueError("matrix must be square")
    b = [list(col) for col in rhs_cols]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular matrix")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            for c in b:
                c[col], c[pivot] = c[pivot], c[col]
        inv = field.inv(a[col][col])
        a[col] = [(x * inv) % q for x in a[col]]
        for c in b:
            c[col] = (c[col] * inv) % q
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [(x - f * y) % q for x, y in zip(a[r], a[col])]
                for c in b:
                    c[r] = (c[r] - f * c[col]) % q
    return b


def random_full_rank_V(
    params: "Params",
    supports: Sequence[Iterable[int]],
    rng: random.Random,
    max_attempts: int = 1000,
) -> tuple[FieldVector, ...]:
    """D random vectors with the given supports whose stack has rank D.

    Each vector has nonzero entries drawn uniformly from the multiplicative
    group, filled in ascending index order; the whole batch is redrawn until
    the stacked D x K matrix is full rank.  Success is expected quickly for
    any q > D, so exhausting the attempt budget indicates a broken caller.
    """
    field = PrimeField(params.q)
    D = len(supports)
    sorted_supports = [sorted(s) for s in supports]
    if any(not s for s in sorted_supports):
        raise ValueError("every support must be nonempty")
    for _ in range(max_attempts):
        vecs = []
        for sup in sorted_supports:
            vecs.append(
                vector_with_support(params.K, {idx: field.rand_nonzero(rng) for idx in sup})
            )
        if matrix_rank(field, vecs) == D:
            return tuple(vecs)
    raise RuntimeError(
        f"no full-rank draw in {max_attempts} attempts (q={params.q}, D={D}); "
        "this should be impossible for q > D"
    )
