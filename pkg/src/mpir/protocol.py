"""One retrieval round: build queries, answer them, recover the demand.

The three steps are pure functions over an immutable message store, so a
round can run fully in memory; the network layer reuses the same pieces.
Randomness is consumed in a fixed order (row draw, mixing vector entries,
demand vector entries per full-rank attempt, then the server permutation),
which makes a seeded round bit-reproducible across the in-memory and
networked paths.
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import gf, plan
from .params import Params
from .prob import ProbTable

Message = tuple[int, ...]
Answer = Message | None  # None when the query was the zero vector


@dataclass(frozen=True)
class MessageStore:
    """K messages of length m over the prime field, identical on every server."""

    q: int
    m: int
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        for idx, msg in enumerate(self.messages, start=1):
            if len(msg) != self.m:
                raise ValueError(f"message {idx} has length {len(msg)}, expected {self.m}")
            if any(not 0 <= v < self.q for v in msg):
                raise ValueError(f"message {idx} has entries outside [0, {self.q})")

    @property
    def K(self) -> int:
        return len(self.messages)

    @classmethod
    def random(cls, params: Params, rng: random.Random) -> "MessageStore":
        msgs = tuple(
            tuple(rng.randrange(params.q) for _ in range(params.m))
            for _ in range(params.K)
        )
        return cls(q=params.q, m=params.m, messages=msgs)


@dataclass(frozen=True)
class QuerySet:
    """The N query vectors of one round, keyed by receiving server.

    permutation[n] is the 0-based server receiving column n, where column 0
    is the pure mixing vector U and column h is U + V[h-1];
    queries[permutation[n]] holds that column.
    """

    row: plan.RowId
    permutation: tuple[int, ...]
    queries: tuple[gf.FieldVector, ...]
    U: gf.FieldVector
    V: tuple[gf.FieldVector, ...]


@dataclass(frozen=True)
class Transcript:
    """Everything observable in one round, for auditing and comparison."""

    W: tuple[int, ...]
    query_set: QuerySet
    answers: tuple[Answer, ...]
    recovered: tuple[Message, ...]
    download_elements: int

    def to_bytes(self) -> bytes:
        """Canonical byte serialization, for exact transcript comparison."""
        out = bytearray()
        out += struct.pack("<I", len(self.W)) + struct.pack(f"<{len(self.W)}I", *self.W)
        out += struct.pack("<4I", *self.query_set.row)
        out += struct.pack(f"<{len(self.query_set.permutation)}I", *self.query_set.permutation)
        for vec in self.query_set.queries:
            out += struct.pack(f"<{len(vec)}Q", *vec)
        for ans in self.answers:
            if ans is None:
                out += b"\x00"
            else:
                out += b"\x01" + struct.pack(f"<{len(ans)}Q", *ans)
        for msg in self.recovered:
            out += struct.pack(f"<{len(msg)}Q", *msg)
        out += struct.pack("<Q", self.download_elements)
        return bytes(out)


def make_query_set(
    params: Params, prob: ProbTable, W: Iterable[int], rng: random.Random
) -> QuerySet:
    """Sample a row, draw the query vectors, and assign them to servers."""
    w = plan.as_demand(params, W)
    row = plan.sample_row(params, prob, w, rng)
    base = plan.r_subset(params, w, row.i, row.k)
    field = gf.PrimeField(params.q)
    U = gf.vector_with_support(params.K, {idx: field.rand_nonzero(rng) for idx in base})
    T = plan.choose_T_collection(params, w, row.j)[row.l - 1]
    shifted = [plan.shift_subset(w, T, h) for h in range(1, params.D + 1)]
    V = gf.random_full_rank_V(params, shifted, rng)
    columns = (U,) + tuple(field.vec_add(U, v) for v in V)
    servers = list(range(params.N))
    rng.shuffle(servers)
    permutation = tuple(servers)
    queries: list[gf.FieldVector] = [()] * params.N
    for n, col in enumerate(columns):
        queries[permutation[n]] = col
    return QuerySet(row=row, permutation=permutation, queries=tuple(queries), U=U, V=V)


def server_answer(store: MessageStore, query: Sequence[int]) -> Answer:
    """Linear combination of the stored messages, or None for a zero query.

    This is the only computation a server performs; it sees nothing but the
    coefficient vector.
    """
    if len(query) != store.K:
        raise ValueError(f"query length {len(query)} != K={store.K}")
    if all(c == 0 for c in query):
        return None
    q = store.q
    acc = [0] * store.m
    for coeff, msg in zip(query, store.messages):
        if coeff:
            for t in range(store.m):
                acc[t] += coeff * msg[t]
    return tuple(v % q for v in acc)


def recover(
    params: Params, query_set: QuerySet, answers: Sequence[Answer]
) -> tuple[Message, ...]:
    """Solve for the D demand messages from the N per-server answers.

    Answers are un-permuted back into column order (silent servers count as
    zero), differenced against the first column, and the resulting D x D
    system over the demand columns is solved once for all m coordinates.
    """
    field = gf.PrimeField(params.q)
    zero = (0,) * params.m
    by_column = [answers[query_set.permutation[n]] or zero for n in range(params.N)]
    z_rows = [field.vec_sub(by_column[1 + h], by_column[0]) for h in range(params.D)]
    w = sorted(set().union(*(gf.support(v) for v in query_set.V)))
    if len(w) != params.D:
        raise ValueError("demand vectors do not cover a full demand set")
    vmat = [[vec[x - 1] for x in w] for vec in query_set.V]
    return gf.solve_multi(field, vmat, z_rows)


def run_round(
    params: Params,
    prob: ProbTable,
    W: Iterable[int],
    store: MessageStore,
    rng: random.Random,
) -> Transcript:
    """Execute one full in-memory round against a concrete store."""
    w = plan.as_demand(params, W)
    if (store.K, store.q, store.m) != (params.K, params.q, params.m):
        raise ValueError("store shape does not match params")
    qs = make_query_set(params, prob, w, rng)
    answers = tuple(server_answer(store, qvec) for qvec in qs.queries)
    recovered = recover(params, qs, answers)
    downloaded = params.m * sum(1 for a in answers if a is not None)
    return Transcript(
        W=w,
        query_set=qs,
        answers=answers,
        recovered=recovered,
        download_elements=downloaded,
    )
