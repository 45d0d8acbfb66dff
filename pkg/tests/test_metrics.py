import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import BOB, INDUSTRY, T1, T2, TECH, WORKS_AT, XCORP, bgp_queries, ex, graphs, q
from kgcoreset.metrics import (
    CoverageWeights,
    UndefinedCoverageError,
    UserReport,
    aggregate_users,
    answer_f1,
    coverage,
    dump_json,
    evaluate_summary,
    prf,
    write_csv,
)
from kgcoreset.store import KnowledgeGraph, Term, Triple

EMPTY = KnowledgeGraph.from_triples([])
BOB_AT_XCORP = q([], (BOB, WORKS_AT, XCORP))
Q3 = q(["y"], (BOB, WORKS_AT, "?c"), ("?c", INDUSTRY, "?y"))


def report(user_id, f1, cov=0.5, flags=()):
    return UserReport(user_id, "corekg", cov, 1.0, f1, f1, 1, 0, 1, 3, 10, 4, 1, 4, 4.0, flags=list(flags))


def test_coverage_examples():
    assert coverage(KnowledgeGraph.from_triples([T1]), [BOB_AT_XCORP]) == 1.0
    half_nodes = KnowledgeGraph.from_triples([Triple(BOB, WORKS_AT, ex("Alice"))])
    assert coverage(half_nodes, [BOB_AT_XCORP]) == 0.75
    assert coverage(EMPTY, [BOB_AT_XCORP]) == 0.0


def test_coverage_skip_and_renormalize():
    nodes_only = q(["p"], (BOB, "?p", XCORP))
    edges_only = q(["s", "o"], ("?s", WORKS_AT, "?o"))
    summary = KnowledgeGraph.from_triples([Triple(BOB, INDUSTRY, TECH)])
    # nodes term alone, weight renormalized to 1
    assert coverage(summary, [nodes_only]) == 0.5
    assert coverage(summary, [edges_only]) == 0.0
    # a constant-free query is left out of the mean
    assert coverage(summary, [nodes_only, q([], ("?s", "?p", "?o"))]) == 0.5
    with pytest.raises(UndefinedCoverageError):
        coverage(summary, [q([], ("?s", "?p", "?o"))])


def test_custom_weights():
    summary = KnowledgeGraph.from_triples([Triple(BOB, WORKS_AT, ex("Alice"))])
    assert coverage(summary, [BOB_AT_XCORP], CoverageWeights(0.2, 0.8)) == pytest.approx(0.2 * 0.5 + 0.8)
    with pytest.raises(ValueError):
        CoverageWeights(-0.1, 0.5)


def test_prf_arithmetic():
    p, r, f1 = prf(3, 1, 2)
    assert (p, r) == (0.75, 0.6)
    assert f1 == pytest.approx(2 * 0.45 / 1.35)
    assert round(f1, 4) == 0.6667
    assert prf(0, 0, 0) == (0.0, 0.0, 0.0)


def test_identity_summary_is_perfect(two_triple_graph):
    g = two_triple_graph
    assert answer_f1(g, g, [Q3, q(["x"], (BOB, WORKS_AT, "?x"))]) == (1.0, 1.0, 1.0)
    assert coverage(g, [Q3]) == 1.0


def test_empty_summary_scores_zero(two_triple_graph):
    assert answer_f1(EMPTY, two_triple_graph, [Q3]) == (0.0, 0.0, 0.0)


def test_partial_summary_recalls_part(two_triple_graph):
    g = two_triple_graph
    queries = [q(["x"], (BOB, WORKS_AT, "?x")), q(["x"], (XCORP, INDUSTRY, "?x"))]
    assert answer_f1(KnowledgeGraph.from_triples([T1]), g, queries) == pytest.approx((1.0, 0.5, 2 / 3))


def test_evaluate_summary_breakdown(two_triple_graph):
    g = two_triple_graph
    cov, (p, r, f1), counts, rows = evaluate_summary(KnowledgeGraph.from_triples([T2]), g, [Q3, BOB_AT_XCORP])
    assert counts == (0, 0, 2)
    assert [x.query_id for x in rows] == [Q3.id, BOB_AT_XCORP.id]
    # Q3: nodes {Bob} missing, edges {worksAt, industry} half present -> 0.25; BOB_AT_XCORP: 0.25
    assert cov == pytest.approx(0.25)
    assert (p, r, f1) == (0.0, 0.0, 0.0)


def test_aggregate_examples():
    agg = aggregate_users([report("a", 0.4), report("b", 0.6)])
    assert agg.f1 == pytest.approx(0.5)
    assert agg.users == agg.evaluated_users == 2
    solo = aggregate_users([report("a", 0.4)])
    assert (solo.f1, solo.coverage, solo.precision) == (0.4, 0.5, 1.0)
    with pytest.raises(ValueError):
        aggregate_users([])


def test_aggregate_skips_unevaluated_users():
    agg = aggregate_users([report("a", 0.4), report("b", 0.0, cov=None, flags=["empty_test"])] +
                          [report(f"u{i}", 0.7) for i in range(13)])
    assert agg.users == 15 and agg.evaluated_users == 14
    assert agg.flagged == ["b"]
    assert agg.f1 == pytest.approx((0.4 + 13 * 0.7) / 14)


def test_report_serialization_round_trip():
    r = report("u00", 0.5)
    buf = io.StringIO()
    dump_json(r.to_json(), buf)
    assert UserReport.from_json(json.loads(buf.getvalue())) == r
    out = io.StringIO()
    write_csv([r], out)
    assert out.getvalue().splitlines() == ["user_id,coverage,precision,recall,f1,summary_size", "u00,0.5,1.0,0.5,0.5,3"]


@st.composite
def graph_and_subsets(draw):
    g = draw(graphs(max_triples=25))
    ids = list(range(len(g)))
    small = draw(st.sets(st.sampled_from(ids))) if ids else set()
    extra = draw(st.sets(st.sampled_from(ids))) if ids else set()
    return g, small, small | extra


def _sub(g, ids):
    return KnowledgeGraph.from_triples(g.triple(i) for i in sorted(ids))


@given(graph_and_subsets(), st.lists(bgp_queries(), min_size=1, max_size=5))
def test_coverage_is_monotone(data, queries):
    g, small, big = data
    try:
        lo = coverage(_sub(g, small), queries)
    except UndefinedCoverageError:
        return
    assert lo <= coverage(_sub(g, big), queries) + 1e-12


@given(graph_and_subsets(), st.lists(bgp_queries(), min_size=1, max_size=5))
def test_subgraph_answers_never_false_positive(data, queries):
    g, small, _ = data
    cov, (p, r, f1), (tp, fp, fn), _ = evaluate_summary(_sub(g, small), g, queries)
    assert fp == 0
    assert 0 <= f1 <= 1
    if tp:
        assert p == 1.0


@given(graphs(max_triples=25), st.lists(bgp_queries(), min_size=1, max_size=5))
def test_full_graph_scores_one(g, queries):
    cov, (p, r, f1), (tp, fp, fn), _ = evaluate_summary(g, g, queries)
    if tp:
        assert (p, r, f1) == (1.0, 1.0, 1.0)
    known = g.node_terms() | g.predicate_terms()
    constants_present = all(x in known for query in queries for pat in query.bgp for x in pat if isinstance(x, Term))
    if cov is not None and constants_present:
        assert cov == 1.0
