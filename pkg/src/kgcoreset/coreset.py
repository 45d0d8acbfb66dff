"""Weighted coreset sampling over a sensitivity distribution."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Any, Callable, Iterable, NamedTuple

import numpy as np

from .sensitivity import SamplingDistribution, SensitivityTable
from .store import KnowledgeGraph, Triple, parse_line, subgraph

# draw cap in budget mode, as a multiple of the budget
BUDGET_DRAW_FACTOR = 50


@dataclass(frozen=True)
class SamplingConfig:
    m: int | None = None
    epsilon: float | None = None
    delta: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        explicit = self.m is not None
        bound = self.epsilon is not None or self.delta is not None
        if explicit == bound:
            raise ValueError("set exactly one of m or (epsilon, delta)")
        if explicit and self.m < 1:
            raise ValueError("m must be >= 1")
        if bound:
            _check_unit("epsilon", self.epsilon)
            _check_unit("delta", self.delta)

    def sample_size(self, q_count: int) -> int:
        if self.m is not None:
            return self.m
        return required_sample_size(self.epsilon, self.delta, q_count)


def _check_unit(name: str, x: float | None):
    if x is None or not 0 < x < 1:
        raise ValueError(f"{name} must be in (0, 1), got {x}")


class Entry(NamedTuple):
    multiplicity: int
    weight: float


@dataclass
class WeightedSummary:
    entries: dict[int, Entry]
    m: int
    s_used: float
    source_user: str | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def triple_ids(self) -> list[int]:
        return sorted(self.entries)


def required_sample_size(epsilon: float, delta: float, q_count: int) -> int:
    """Smallest m with m >= 8 |Q| / eps^2 * ln(1/delta)."""
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    if q_count < 1:
        raise ValueError("q_count must be >= 1 (no answerable queries)")
    return math.ceil(8 * q_count / epsilon**2 * math.log(1 / delta))


def summarize_draws(draws: np.ndarray, m: int, weight: Callable[[int, int], float]) -> dict[int, Entry]:
    """Fold a draw sequence into entries; ``weight(tid, m)`` gives the per-triple weight."""
    ids, counts = np.unique(draws, return_counts=True)
    return {int(t): Entry(int(x), float(weight(int(t), m))) for t, x in zip(ids, counts)}


def budget_cut(draws: np.ndarray, budget: int) -> int:
    """Number of leading draws needed to see ``budget`` distinct triples (all if never)."""
    _, first = np.unique(draws, return_index=True)
    if len(first) < budget:
        return len(draws)
    return int(np.sort(first)[budget - 1]) + 1


def sample_coreset(
    dist: SamplingDistribution,
    table: SensitivityTable,
    m: int,
    rng_seed: int,
    user_id: str | None = None,
) -> WeightedSummary:
    """m i.i.d. draws from ``dist``; triple t gets weight S / (m s(t))."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(rng_seed)
    draws = dist.draw(rng, m)
    return _weighted_summary(draws, m, table, user_id, {"m": m, "rng_seed": rng_seed})


def sample_coreset_budget(
    dist: SamplingDistribution,
    table: SensitivityTable,
    budget: int,
    rng_seed: int,
    user_id: str | None = None,
) -> WeightedSummary:
    """Draw until ``budget`` distinct triples are held or 50*budget draws are spent."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(rng_seed)
    draws = dist.draw(rng, BUDGET_DRAW_FACTOR * budget)
    m = budget_cut(draws, budget)
    return _weighted_summary(draws[:m], m, table, user_id, {"budget": budget, "rng_seed": rng_seed})


def _weighted_summary(draws, m, table, user_id, meta) -> WeightedSummary:
    S, s = table.total, table.s
    entries = summarize_draws(draws, m, lambda t, m: S / (m * s[t]))
    meta = {**meta, "effective_m": m}
    return WeightedSummary(entries, m, S, user_id if user_id is not None else table.user_id, meta)


def coreset_cost(summary: WeightedSummary, table: SensitivityTable) -> float:
    """Weighted workload cost of the summary: sum of X_t * w_t * c_t."""
    if summary.source_user is not None and table.user_id is not None and summary.source_user != table.user_id:
        raise ValueError(f"summary belongs to {summary.source_user!r}, table to {table.user_id!r}")
    c = table.c
    return math.fsum(e.multiplicity * e.weight * float(c[t]) for t, e in sorted(summary.entries.items()))


def materialize_summary_graph(summary: WeightedSummary, graph: KnowledgeGraph) -> KnowledgeGraph:
    """The sampled triples as a graph, one copy each."""
    return subgraph(graph, summary.triple_ids)


# ---------------------------------------------------------------------------
# summary files: subject<TAB>predicate<TAB>object<TAB>weight<TAB>multiplicity


def write_summary_tsv(summary: WeightedSummary, graph: KnowledgeGraph, out: IO[str]) -> None:
    for tid in summary.triple_ids:
        t = graph.triple(tid)
        e = summary.entries[tid]
        out.write(f"{t.subject.n3()}\t{t.predicate.n3()}\t{t.object.n3()}\t{e.weight!r}\t{e.multiplicity}\n")


def read_summary_tsv(stream: IO[str] | Iterable[str]) -> list[tuple[Triple, float, int]]:
    rows = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError(f"summary line {lineno}: expected 5 tab-separated fields")
        triple = parse_line(" ".join(parts[:3]) + " .")
        rows.append((triple, float(parts[3]), int(parts[4])))
    return rows


def summary_manifest(summary: WeightedSummary) -> dict[str, Any]:
    return {
        "user_id": summary.source_user,
        "m": summary.m,
        "S": summary.s_used,
        "distinct_triples": len(summary),
        **summary.meta,
    }


def write_summary_manifest(summary: WeightedSummary, out: IO[str], **extra: Any) -> None:
    json.dump({**summary_manifest(summary), **extra}, out, indent=2, sort_keys=True)
    out.write("\n")
