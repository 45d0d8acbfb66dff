"""Shared helpers for the comparison scripts and the acceptance suite.

Everything runs in memory on a generated benchmark so that one process can
sweep several methods and budgets without re-parsing files.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .metrics import AggregateReport
from .pipeline import METHODS, RunConfig, UserResult, run_in_memory
from .query import Query, parse_workload
from .store import KnowledgeGraph
from .synthetic import PREFIXES, make_synthetic


@dataclass(frozen=True)
class BenchmarkConfig:
    """Synthetic skewed benchmark used by the ablation and budget-sweep runs."""

    entities: int = 300
    relations: int = 1000
    triples: int = 5000
    queries: int = 4000
    skew: float = 1.0
    rng_seed: int = 0
    dead_fraction: float = 0.05
    relation_skew: float | None = 0.0
    facet_skew: float | None = 2.0


@dataclass
class Benchmark:
    config: BenchmarkConfig
    graph: KnowledgeGraph
    queries: list[Query]


def build_benchmark(config: BenchmarkConfig = BenchmarkConfig()) -> Benchmark:
    data = make_synthetic(config.entities, config.relations, config.triples, config.queries,
                          config.skew, config.rng_seed, config.dead_fraction,
                          config.relation_skew, config.facet_skew)
    loaded = parse_workload(data.queries, PREFIXES)
    return Benchmark(config, data.graph(), loaded.queries)


def run_method(bench: Benchmark, method: str, base: RunConfig) -> tuple[list[UserResult], AggregateReport]:
    return run_in_memory(bench.graph, bench.queries, replace(base, method=method))


def compare_methods(
    bench: Benchmark,
    base: RunConfig,
    methods: Sequence[str] = METHODS,
) -> dict[str, AggregateReport]:
    return {m: run_method(bench, m, base)[1] for m in methods}


def budget_sweep(
    bench: Benchmark,
    fractions: Iterable[float],
    rng_seeds: Iterable[int],
    method: str = "corekg",
    base: RunConfig | None = None,
) -> dict[float, tuple[float, float]]:
    """Mean (coverage, F1) per budget fraction, averaged over RNG seeds."""
    base = base or RunConfig()
    seeds = list(rng_seeds)
    out = {}
    for frac in fractions:
        cov = f1 = 0.0
        for seed in seeds:
            cfg = replace(base, method=method, samples=None, epsilon=None, delta=None,
                          budget=None, budget_fraction=frac, rng_seed=seed)
            _, agg = run_in_memory(bench.graph, bench.queries, cfg)
            cov += agg.coverage
            f1 += agg.f1
        out[frac] = (cov / len(seeds), f1 / len(seeds))
    return out


def format_table(rows: dict[str, AggregateReport]) -> str:
    lines = [f"{'method':<20}{'users':>7}{'coverage':>10}{'f1':>8}"]
    for name, agg in rows.items():
        lines.append(f"{name:<20}{agg.evaluated_users:>7}{100 * agg.coverage:>10.2f}{100 * agg.f1:>8.2f}")
    return "\n".join(lines)
