"""Structural coverage and answer-level F1 of a summary graph."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import IO, Any, Mapping, Sequence

from .engine import AnswerSet, answers
from .query import Query, Variable
from .store import KnowledgeGraph, Term, TermKind

log = logging.getLogger(__name__)


class UndefinedCoverageError(ValueError):
    pass


@dataclass(frozen=True)
class CoverageWeights:
    w_n: float = 0.5
    w_p: float = 0.5

    def __post_init__(self):
        if self.w_n < 0 or self.w_p < 0:
            raise ValueError("coverage weights must be non-negative")


def query_nodes(q: Query) -> set[Term]:
    return {x for pat in q.bgp for x in (pat.subject, pat.object)
            if isinstance(x, Term) and x.kind is TermKind.IRI}


def query_edges(q: Query) -> set[Term]:
    return {pat.predicate for pat in q.bgp
            if not isinstance(pat.predicate, Variable) and pat.predicate.kind is TermKind.IRI}


def query_coverage(q: Query, nodes: set[Term], edges: set[Term], weights: CoverageWeights) -> float | None:
    """Per-query coverage, or ``None`` when the query has no constants to score."""
    qn, qe = query_nodes(q), query_edges(q)
    if not qn and not qe:
        return None
    if not qe:
        return len(qn & nodes) / len(qn)
    if not qn:
        return len(qe & edges) / len(qe)
    return weights.w_n * len(qn & nodes) / len(qn) + weights.w_p * len(qe & edges) / len(qe)


def coverage(summary_graph: KnowledgeGraph, test_queries: Sequence[Query], weights: CoverageWeights = CoverageWeights()) -> float:
    """Mean per-query coverage over the queries that have at least one constant."""
    nodes = summary_graph.node_terms()
    edges = summary_graph.predicate_terms()
    scores = [query_coverage(q, nodes, edges, weights) for q in test_queries]
    scored = [x for x in scores if x is not None]
    if len(scored) < len(scores):
        log.info("coverage: %d query(ies) without constants skipped", len(scores) - len(scored))
    if not scored:
        raise UndefinedCoverageError("no test query has a constant node or edge")
    return sum(scored) / len(scored)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall and F1; zero denominators give 0."""
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass
class QueryScore:
    query_id: str
    coverage: float | None
    tp: int
    fp: int
    fn: int


def answer_counts(summary_answers: AnswerSet, full_answers: AnswerSet) -> tuple[int, int, int]:
    return (
        len(summary_answers & full_answers),
        len(summary_answers - full_answers),
        len(full_answers - summary_answers),
    )


def answer_f1(
    summary_graph: KnowledgeGraph,
    full_graph: KnowledgeGraph,
    test_queries: Sequence[Query],
    full_answers: Mapping[str, AnswerSet] | None = None,
) -> tuple[float, float, float]:
    """Micro-averaged precision, recall and F1 of summary answers against full-graph answers."""
    tp = fp = fn = 0
    for q in test_queries:
        gold = full_answers[q.id] if full_answers is not None else answers(full_graph, q)
        a, b, c = answer_counts(answers(summary_graph, q), gold)
        tp, fp, fn = tp + a, fp + b, fn + c
    return prf(tp, fp, fn)


@dataclass
class UserReport:
    user_id: str
    method: str
    coverage: float | None
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    summary_size: int
    effective_m: int | None
    n_train: int
    n_test: int
    answerable_train: int
    total_sensitivity: float | None
    workload_cost: float | None = None
    coreset_cost: float | None = None
    seeds: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    per_query: list[QueryScore] = field(default_factory=list)

    @property
    def evaluated(self) -> bool:
        return self.coverage is not None

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "UserReport":
        data = dict(data)
        data["per_query"] = [QueryScore(**x) for x in data.get("per_query", [])]
        return cls(**data)


def evaluate_summary(
    summary_graph: KnowledgeGraph,
    full_graph: KnowledgeGraph,
    test_queries: Sequence[Query],
    weights: CoverageWeights = CoverageWeights(),
    full_answers: Mapping[str, AnswerSet] | None = None,
) -> tuple[float | None, tuple[float, float, float], tuple[int, int, int], list[QueryScore]]:
    """Coverage, (P, R, F1), pooled (TP, FP, FN) and the per-query breakdown."""
    nodes = summary_graph.node_terms()
    edges = summary_graph.predicate_terms()
    rows = []
    for q in test_queries:
        gold = full_answers[q.id] if full_answers is not None else answers(full_graph, q)
        tp, fp, fn = answer_counts(answers(summary_graph, q), gold)
        rows.append(QueryScore(q.id, query_coverage(q, nodes, edges, weights), tp, fp, fn))
    scored = [r.coverage for r in rows if r.coverage is not None]
    cov = sum(scored) / len(scored) if scored else None
    tp = sum(r.tp for r in rows)
    fp = sum(r.fp for r in rows)
    fn = sum(r.fn for r in rows)
    return cov, prf(tp, fp, fn), (tp, fp, fn), rows


@dataclass
class AggregateReport:
    method: str
    users: int
    evaluated_users: int
    coverage: float
    precision: float
    recall: float
    f1: float
    flagged: list[str]
    per_user: list[dict[str, Any]]

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def aggregate_users(reports: Sequence[UserReport]) -> AggregateReport:
    """Unweighted mean of the per-user metrics over users that were evaluated."""
    if not reports:
        raise ValueError("no user reports to aggregate")
    ok = [r for r in reports if r.evaluated]
    if not ok:
        raise ValueError("no user could be evaluated")

    def mean(xs):
        xs = list(xs)
        return sum(xs) / len(xs)

    return AggregateReport(
        method=reports[0].method,
        users=len(reports),
        evaluated_users=len(ok),
        coverage=mean(r.coverage for r in ok),
        precision=mean(r.precision for r in ok),
        recall=mean(r.recall for r in ok),
        f1=mean(r.f1 for r in ok),
        flagged=[r.user_id for r in reports if r.flags],
        per_user=[
            {"user_id": r.user_id, "coverage": r.coverage, "precision": r.precision, "recall": r.recall,
             "f1": r.f1, "summary_size": r.summary_size, "flags": r.flags}
            for r in reports
        ],
    )


CSV_FIELDS = ("user_id", "coverage", "precision", "recall", "f1", "summary_size")


def write_csv(reports: Sequence[UserReport], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow([r.user_id, "" if r.coverage is None else repr(r.coverage),
                    repr(r.precision), repr(r.recall), repr(r.f1), r.summary_size])


def dump_json(obj: Any, out: IO[str]) -> None:
    json.dump(obj, out, indent=2, sort_keys=True)
    out.write("\n")
