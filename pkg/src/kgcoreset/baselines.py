"""Ablation variants and a Personalized PageRank summary baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from .coreset import BUDGET_DRAW_FACTOR, Entry, WeightedSummary, budget_cut, summarize_draws
from .store import KnowledgeGraph, Term

log = logging.getLogger(__name__)


def _uniform(graph: KnowledgeGraph, draws: np.ndarray, m: int, user_id, meta) -> WeightedSummary:
    n = len(graph)
    entries = summarize_draws(draws, m, lambda t, m: n / m)
    return WeightedSummary(entries, m, float(n), user_id, {**meta, "effective_m": m})


def uniform_coreset(graph: KnowledgeGraph, m: int, rng_seed: int, user_id: str | None = None) -> WeightedSummary:
    """m uniform draws over all triples, each weighted |T|/m."""
    if len(graph) == 0:
        raise ValueError("empty graph")
    if m < 1:
        raise ValueError("m must be >= 1")
    draws = np.random.default_rng(rng_seed).integers(0, len(graph), size=m)
    return _uniform(graph, draws, m, user_id, {"m": m, "rng_seed": rng_seed})


def uniform_coreset_budget(graph: KnowledgeGraph, budget: int, rng_seed: int, user_id: str | None = None) -> WeightedSummary:
    if len(graph) == 0:
        raise ValueError("empty graph")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    draws = np.random.default_rng(rng_seed).integers(0, len(graph), size=BUDGET_DRAW_FACTOR * budget)
    m = budget_cut(draws, budget)
    return _uniform(graph, draws[:m], m, user_id, {"budget": budget, "rng_seed": rng_seed})


def strip_weights(summary: WeightedSummary) -> WeightedSummary:
    """Same draws, every weight forced to 1."""
    entries = {t: Entry(e.multiplicity, 1.0) for t, e in summary.entries.items()}
    return replace(summary, entries=entries, meta={**summary.meta, "unweighted": True})


@dataclass(frozen=True)
class PprConfig:
    damping: float = 0.85
    max_iterations: int = 100
    tolerance: float = 1e-8

    def __post_init__(self):
        if not 0 < self.damping < 1:
            raise ValueError("damping must be in (0, 1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def ppr_scores(graph: KnowledgeGraph, seeds: Iterable[Term], config: PprConfig = PprConfig()) -> dict[Term, float]:
    """Personalized PageRank on the undirected subject-object graph.

    Restart mass is spread uniformly over the seeds that occur as nodes.
    """
    nodes = sorted({k for s, _, o in graph.triples for k in (s, o)})
    index = {tid: i for i, tid in enumerate(nodes)}
    present = []
    for seed in seeds:
        tid = graph.term_id(seed)
        if tid is None or tid not in index:
            log.warning("seed %s is not a node of the graph; dropped", seed)
        else:
            present.append(index[tid])
    if not present:
        raise ValueError("none of the seeds occurs in the graph")

    n = len(nodes)
    rows, cols = [], []
    for s, _, o in graph.triples:
        rows.append(index[s])
        cols.append(index[o])
        if s != o:
            rows.append(index[o])
            cols.append(index[s])
    adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    deg = np.asarray(adj.sum(axis=0)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    walk = adj @ sparse.diags(inv)  # column-stochastic on non-isolated nodes
    dangling = deg == 0

    restart = np.zeros(n)
    restart[sorted(set(present))] = 1.0
    restart /= restart.sum()

    d = config.damping
    x = restart.copy()
    for _ in range(config.max_iterations):
        nxt = d * (walk @ x) + (d * x[dangling].sum() + (1 - d)) * restart
        residual = np.abs(nxt - x).sum()
        x = nxt
        if residual < config.tolerance:
            break
    x /= x.sum()
    return {graph.terms[tid]: float(x[i]) for i, tid in enumerate(nodes)}


def ppr_summary(graph: KnowledgeGraph, scores: Mapping[Term, float], budget: int, user_id: str | None = None) -> WeightedSummary:
    """Top-``budget`` triples by score(subject) + score(object); ties by TripleId."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > len(graph):
        log.warning("budget %d exceeds graph size %d; taking every triple", budget, len(graph))
    by_id = {graph.term_id(t): v for t, v in scores.items() if graph.term_id(t) is not None}
    keyed = sorted(range(len(graph)),
                   key=lambda tid: (-(by_id.get(graph.triples[tid][0], 0.0) + by_id.get(graph.triples[tid][2], 0.0)), tid))
    chosen = keyed[:budget]
    entries = {tid: Entry(1, 1.0) for tid in chosen}
    return WeightedSummary(entries, len(chosen), float(len(chosen)), user_id, {"budget": budget, "effective_m": len(chosen)})
