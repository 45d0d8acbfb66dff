import gzip
import io
import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import BOB, EX, NODES, PREDS, T1, WORKS_AT, XCORP, ex, graphs
from kgcoreset.query import Variable
from kgcoreset.store import (
    KnowledgeGraph,
    NTriplesError,
    Term,
    TermKind,
    Triple,
    load_ntriples,
    lookup_pattern,
    parse_line,
    parse_ntriples,
    serialize_ntriples,
    subgraph,
)

BOB_LINE = "<http://ex.org/Bob> <http://ex.org/worksAt> <http://ex.org/XCorp> .\n"


def test_single_line_gives_one_triple():
    g = parse_ntriples(io.StringIO(BOB_LINE))
    assert len(g) == 1
    assert g.triple(0) == T1


def test_empty_stream():
    assert len(parse_ntriples(io.StringIO(""))) == 0


def test_repeated_line_collapses_to_one_id():
    g = parse_ntriples(io.StringIO(BOB_LINE * 3))
    assert len(g) == 1
    assert g.triple_id(T1) == 0


def test_comments_blank_lines_and_malformed_are_counted():
    text = "# header\n\n" + BOB_LINE + "garbage line\n<a> <b> .\n"
    report = io.StringIO()
    g = parse_ntriples(io.StringIO(text), report=report)
    assert len(g) == 1
    assert g.malformed == 2
    assert "malformed" in report.getvalue()


def test_strict_mode_fails_on_malformed():
    with pytest.raises(NTriplesError):
        parse_ntriples(io.StringIO(BOB_LINE + "nonsense\n"), strict=True)


def test_literal_forms_and_escapes():
    lines = [
        '<http://ex.org/a> <http://ex.org/p> "plain" .',
        '<http://ex.org/a> <http://ex.org/p> "chat"@fr .',
        '<http://ex.org/a> <http://ex.org/p> "5"^^<http://www.w3.org/2001/XMLSchema#integer> .',
        '<http://ex.org/a> <http://ex.org/p> "tab\\there \\"quoted\\" \\u00e9" .',
        "_:b0 <http://ex.org/p> _:b1 .",
    ]
    g = parse_ntriples(io.StringIO("\n".join(lines)))
    objs = [g.triple(i).object for i in range(len(g))]
    assert objs[0] == Term.literal("plain")
    assert objs[1] == Term.literal("chat", lang="fr")
    assert objs[2].datatype == "http://www.w3.org/2001/XMLSchema#integer"
    assert objs[3].value == 'tab\there "quoted" é'
    assert g.triple(4).subject.kind is TermKind.BNODE


def test_literals_compare_bit_exactly():
    a = Term.literal("5", datatype="http://www.w3.org/2001/XMLSchema#integer")
    b = Term.literal("05", datatype="http://www.w3.org/2001/XMLSchema#integer")
    assert a != b
    assert Term.literal("x") != Term.literal("x", lang="en")


def test_term_and_triple_invariants():
    with pytest.raises(ValueError):
        Term.iri("")
    with pytest.raises(ValueError):
        Term.iri("http://ex.org/has space")
    with pytest.raises(ValueError):
        Triple(BOB, Term.literal("p"), XCORP)
    with pytest.raises(ValueError):
        Triple(Term.literal("s"), WORKS_AT, XCORP)


def test_interning_gives_identical_ids():
    g = KnowledgeGraph.from_triples([T1, Triple(ex("Bob"), ex("knows"), ex("Alice"))])
    assert g.triples[0][0] == g.triples[1][0]
    assert g.term_id(Term.iri(EX + "Bob")) == g.triples[0][0]


def test_gzip_detected_by_magic(tmp_path):
    path = tmp_path / "data.bin"  # no .gz suffix on purpose
    path.write_bytes(gzip.compress((BOB_LINE * 2).encode()))
    assert len(load_ntriples(path)) == 1


def test_lookup_examples(two_triple_graph):
    g = two_triple_graph
    assert lookup_pattern(g, (BOB, Variable("p"), Variable("o"))) == {g.triple_id(T1)}
    assert lookup_pattern(g, (Variable("s"), Variable("p"), Variable("o"))) == {0, 1}
    assert lookup_pattern(g, (ex("Alice"), Variable("p"), Variable("o"))) == set()


def test_repeated_variable_within_pattern():
    g = KnowledgeGraph.from_triples([Triple(BOB, WORKS_AT, BOB), T1])
    assert lookup_pattern(g, (Variable("x"), WORKS_AT, Variable("x"))) == {0}


def test_subgraph_unknown_id(two_triple_graph):
    assert len(subgraph(two_triple_graph, [1])) == 1
    with pytest.raises(KeyError):
        subgraph(two_triple_graph, [7])


@given(graphs(max_triples=60), st.data())
def test_lookup_matches_linear_scan(g, data):
    pattern = []
    for pos, pool in enumerate((NODES, PREDS, NODES)):
        choice = data.draw(st.one_of(st.none(), st.sampled_from(pool + [ex("absent")])))
        pattern.append(Variable(f"v{pos}") if choice is None else choice)
    expected = {
        tid for tid, t in enumerate(g)
        if all(isinstance(b, Variable) or b == x for b, x in zip(pattern, t))
    }
    assert lookup_pattern(g, pattern) == expected


def test_lookup_every_bound_combination_on_larger_graph():
    nodes = [ex(f"e{i}") for i in range(100)]
    preds = [ex(f"r{i}") for i in range(10)]
    rnd = random.Random(3)
    triples = [Triple(rnd.choice(nodes), rnd.choice(preds), rnd.choice(nodes)) for _ in range(10_000)]
    g = KnowledgeGraph.from_triples(triples)
    assert len(g) > 9000
    probe = g.triple(4321)
    for mask in itertools.product((False, True), repeat=3):
        pattern = [x if bound else Variable(f"v{i}") for i, (x, bound) in enumerate(zip(probe, mask))]
        expected = {tid for tid, t in enumerate(g) if all(not b or x == y for b, x, y in zip(mask, probe, t))}
        assert lookup_pattern(g, pattern) == expected


@given(graphs())
def test_serialize_reparse_round_trip(g):
    buf = io.StringIO()
    serialize_ntriples(g, buf)
    again = parse_ntriples(io.StringIO(buf.getvalue()))
    assert set(again) == set(g)
    assert again.malformed == 0


@given(st.text(min_size=0, max_size=20))
def test_literal_escaping_round_trip(text):
    t = Triple(BOB, WORKS_AT, Term.literal(text))
    assert parse_line(t.n3()) == t
