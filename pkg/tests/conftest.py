import logging

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from kgcoreset.query import Query, TriplePattern, Variable, make_query, parse_workload
from kgcoreset.store import KnowledgeGraph, Term, Triple
from kgcoreset.synthetic import PREFIXES, make_synthetic

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

EX = "http://ex.org/"


def ex(local: str) -> Term:
    return Term.iri(EX + local)


BOB, XCORP, TECH = ex("Bob"), ex("XCorp"), ex("Tech")
WORKS_AT, INDUSTRY = ex("worksAt"), ex("industry")
T1 = Triple(BOB, WORKS_AT, XCORP)
T2 = Triple(XCORP, INDUSTRY, TECH)


@pytest.fixture
def two_triple_graph() -> KnowledgeGraph:
    return KnowledgeGraph.from_triples([T1, T2])


def q(projection, *patterns) -> Query:
    """Build a query from (s, p, o) tuples; strings starting with ``?`` are variables."""
    def node(x):
        if isinstance(x, str):
            return Variable(x[1:])
        return x
    return make_query(projection, [TriplePattern(*(node(x) for x in pat)) for pat in patterns])


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


# ---------------------------------------------------------------------------
# hypothesis strategies: small random graphs over a tiny vocabulary

NODES = [ex(f"n{i}") for i in range(6)]
PREDS = [ex(f"p{i}") for i in range(3)]


@st.composite
def graphs(draw, max_triples: int = 40) -> KnowledgeGraph:
    triples = draw(st.lists(
        st.tuples(st.sampled_from(NODES), st.sampled_from(PREDS), st.sampled_from(NODES)),
        max_size=max_triples,
    ))
    return KnowledgeGraph.from_triples(Triple(*t) for t in triples)


VARS = ["a", "b", "c"]


def slot(kinds):
    return st.one_of(st.sampled_from(kinds), st.sampled_from(VARS).map(Variable))


@st.composite
def bgp_queries(draw, max_patterns: int = 3) -> Query:
    n = draw(st.integers(1, max_patterns))
    pats = [TriplePattern(draw(slot(NODES)), draw(slot(PREDS)), draw(slot(NODES))) for _ in range(n)]
    names = sorted({x.name for p in pats for x in p if isinstance(x, Variable)})
    projection = draw(st.lists(st.sampled_from(names), unique=True)) if names else []
    return make_query(projection, pats)


def synthetic_instance(entities=100, relations=10, triples=1000, queries=50, skew=1.0, rng_seed=7, **kw):
    """A generated graph and its parsed query log."""
    data = make_synthetic(entities, relations, triples, queries, skew, rng_seed, **kw)
    return data.graph(), parse_workload(data.queries, PREFIXES).queries


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
