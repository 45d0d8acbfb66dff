"""Per-triple sensitivity for a query workload.

For every answerable query ``q`` with relevant set ``T_q``, each member of
``T_q`` receives ``1/|T_q|``. Summed over triples this gives exactly one unit
per answerable query, so the total equals the answerable-query count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .engine import RelevanceMode, relevant_triples
from .query import Query
from .store import KnowledgeGraph


class NoSignalError(ValueError):
    """The workload answers nothing, so there is no distribution to sample from."""


@dataclass
class SensitivityTable:
    s: np.ndarray                  # float64, indexed by TripleId
    c: np.ndarray                  # int64 relevance count per TripleId
    total: float
    answerable_count: int
    query_count: int
    tq_sizes: dict[str, int] = field(default_factory=dict)
    user_id: str | None = None

    @property
    def unanswerable(self) -> list[str]:
        return [qid for qid, n in self.tq_sizes.items() if n == 0]

    def sensitivity(self, tid: int) -> float:
        return float(self.s[tid])

    def write_tsv(self, out: IO[str]) -> None:
        """Rows ``triple_id, s(t), c_t`` for triples with non-zero relevance."""
        for tid in np.flatnonzero(self.c):
            out.write(f"{tid}\t{float(self.s[tid])!r}\t{self.c[tid]}\n")


def compute_sensitivity(
    graph: KnowledgeGraph,
    workload: Sequence[Query],
    mode: RelevanceMode = "join",
    user_id: str | None = None,
) -> SensitivityTable:
    if not workload:
        raise ValueError("empty workload")
    if len(graph) == 0:
        raise ValueError("empty graph")
    n = len(graph)
    s = np.zeros(n, dtype=np.float64)
    c = np.zeros(n, dtype=np.int64)
    sizes: dict[str, int] = {}
    # fixed accumulation order: ascending query id, then ascending TripleId
    for q in sorted(workload, key=lambda q: q.id):
        tq = np.fromiter(sorted(relevant_triples(graph, q, mode)), dtype=np.int64)
        sizes[q.id] = len(tq)
        if len(tq) == 0:
            continue
        s[tq] += 1.0 / len(tq)
        c[tq] += 1
    answerable = sum(1 for v in sizes.values() if v)
    return SensitivityTable(
        s=s,
        c=c,
        total=math.fsum(s),
        answerable_count=answerable,
        query_count=len(sizes),
        tq_sizes=sizes,
        user_id=user_id,
    )


def full_cost(table: SensitivityTable) -> float:
    """Workload cost on the full graph: sum of relevance counts, i.e. sum of |T_q|."""
    return float(table.c.sum())


@dataclass
class SamplingDistribution:
    support: np.ndarray   # TripleIds with s(t) > 0, ascending
    p: np.ndarray         # probability per support entry
    cdf: np.ndarray       # cumulative p, last entry pinned to 1.0

    def prob(self, tid: int) -> float:
        k = np.searchsorted(self.support, tid)
        if k < len(self.support) and self.support[k] == tid:
            return float(self.p[k])
        return 0.0

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws, returned as TripleIds."""
        u = rng.random(size)
        return self.support[np.searchsorted(self.cdf, u, side="right")]


def sampling_distribution(table: SensitivityTable) -> SamplingDistribution:
    if not table.total > 0:
        raise NoSignalError("total sensitivity is zero: no query in the workload has an answer")
    support = np.flatnonzero(table.s > 0)
    p = table.s[support] / table.total
    cdf = np.minimum(np.cumsum(p), 1.0)
    cdf[-1] = 1.0
    return SamplingDistribution(support=support, p=p, cdf=cdf)
