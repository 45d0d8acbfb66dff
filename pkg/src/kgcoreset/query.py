"""SPARQL-subset query model: normalization, parsing and entity extraction.

Only SELECT queries over a basic graph pattern are modelled. FILTER,
OPTIONAL, UNION branches and solution modifiers are dropped with a warning,
since the cost model only looks at triple-pattern relevance.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping

from .store import Term, TermKind, unescape

log = logging.getLogger(__name__)

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XSD = "http://www.w3.org/2001/XMLSchema#"

PrefixMap = dict[str, str]

DEFAULT_PREFIXES: PrefixMap = {
    "rdf": RDF,
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "owl": "http://www.w3.org/2002/07/owl#",
    "xsd": XSD,
    "foaf": "http://xmlns.com/foaf/0.1/",
    "skos": "http://www.w3.org/2004/02/skos/core#",
    "dbo": "http://dbpedia.org/ontology/",
    "dbr": "http://dbpedia.org/resource/",
    "dbp": "http://dbpedia.org/property/",
    "wd": "http://www.wikidata.org/entity/",
    "wdt": "http://www.wikidata.org/prop/direct/",
    "ns": "http://rdf.freebase.com/ns/",
}


class QueryError(ValueError):
    pass


class UnknownPrefixError(QueryError):
    def __init__(self, prefix: str):
        super().__init__(f"unknown prefix {prefix!r}")
        self.prefix = prefix


class UnsupportedQueryError(QueryError):
    pass


class QueryParseError(QueryError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if not self.name or self.name[0] in "?$":
            raise ValueError(f"invalid variable name {self.name!r}")

    def __str__(self):
        return f"?{self.name}"


Node = Term | Variable


@dataclass(frozen=True)
class TriplePattern:
    subject: Node
    predicate: Node
    object: Node

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def variables(self) -> list[str]:
        return [x.name for x in self if isinstance(x, Variable)]

    def render(self) -> str:
        return " ".join(render_node(x) for x in self)


@dataclass(frozen=True)
class Query:
    id: str
    projection: tuple[str, ...]
    bgp: tuple[TriplePattern, ...]
    normalized_text: str
    distinct: bool = False

    def variables(self) -> list[str]:
        """All variable names, in order of first appearance."""
        seen: dict[str, None] = {}
        for pat in self.bgp:
            for v in pat.variables():
                seen.setdefault(v)
        return list(seen)

    def __str__(self):
        return self.normalized_text


def render_node(node: Node) -> str:
    return str(node)


def render_query(projection: Iterable[str], bgp: Iterable[TriplePattern], distinct: bool = False) -> str:
    proj = " ".join(f"?{v}" for v in projection) or "*"
    head = "SELECT DISTINCT" if distinct else "SELECT"
    body = " . ".join(p.render() for p in bgp)
    return f"{head} {proj} WHERE {{ {body} }}"


def make_query(projection: Iterable[str], bgp: Iterable[TriplePattern], distinct: bool = False) -> Query:
    projection = tuple(projection)
    bgp = tuple(bgp)
    if not bgp:
        raise QueryParseError("empty basic graph pattern")
    names = {v for p in bgp for v in p.variables()}
    missing = [v for v in projection if v not in names]
    if missing:
        raise QueryParseError(f"projection variable(s) not in pattern: {', '.join(missing)}")
    text = render_query(projection, bgp, distinct)
    qid = hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]
    return Query(qid, projection, bgp, text, distinct)


# ---------------------------------------------------------------------------
# lexical segmentation shared by normalize() and the tokenizer

_IRIREF = r"<[^<>\"{}|^`\\\s]*>"
_STRING = r"\"\"\"(?:[^\"\\]|\\.|\"(?!\"\"))*\"\"\"|'''(?:[^'\\]|\\.|'(?!''))*'''|\"(?:[^\"\\\n\r]|\\.)*\"|'(?:[^'\\\n\r]|\\.)*'"
_SEGMENT_RE = re.compile(rf"(?P<iri>{_IRIREF})|(?P<str>{_STRING})|(?P<comment>#[^\n]*)", re.S)

_DECL_TAIL_RE = re.compile(r"\b(?:PREFIX\s+([A-Za-z](?:[\w.\-]*\w)?)?:|(BASE))\s*$", re.I)
_PNAME_RE = re.compile(r"(?<![\w?$:])([A-Za-z](?:[\w.\-]*[\w\-])?)?:((?:[\w%](?:[\w.%\-]*[\w%\-])?)?)")


def _segments(text: str):
    """Split into ("code" | "iri" | "str", chunk) pieces; comments become a space."""
    pos = 0
    for m in _SEGMENT_RE.finditer(text):
        if m.start() > pos:
            yield "code", text[pos:m.start()]
        yield ("code", " ") if m.lastgroup == "comment" else (m.lastgroup, m.group())
        pos = m.end()
    if pos < len(text):
        yield "code", text[pos:]


def normalize(raw: str, fixed_prefixes: Mapping[str, str] | None = None) -> str:
    """Strip PREFIX declarations, expand prefixed names, collapse whitespace.

    Query-local declarations take precedence over ``fixed_prefixes``; repeated
    declarations of one label collapse (the last wins). The result is a fixed
    point: ``normalize(normalize(x)) == normalize(x)``.
    """
    fixed_prefixes = DEFAULT_PREFIXES if fixed_prefixes is None else fixed_prefixes
    pieces = list(_segments(raw))

    local: dict[str, str] = {}
    kept: list[list[str]] = []
    i = 0
    while i < len(pieces):
        kind, chunk = pieces[i]
        if kind == "code" and i + 1 < len(pieces) and pieces[i + 1][0] == "iri":
            m = _DECL_TAIL_RE.search(chunk)
            if m:
                if not m.group(2):
                    label, iri = m.group(1) or "", pieces[i + 1][1][1:-1]
                    if local.get(label, iri) != iri:
                        log.warning("PREFIX %s: redefined", label)
                    local[label] = iri
                chunk, i = chunk[: m.start()] + " ", i + 1
        if kind == "code" and kept and kept[-1][0] == "code":
            kept[-1][1] += chunk
        else:
            kept.append([kind, chunk])
        i += 1

    def expand(m: re.Match) -> str:
        label, localname = m.group(1) or "", m.group(2)
        if label in local:
            ns = local[label]
        elif label in fixed_prefixes:
            ns = fixed_prefixes[label]
        else:
            raise UnknownPrefixError(label)
        return f"<{ns}{localname}>"

    out = []
    for kind, chunk in kept:
        if kind == "code":
            chunk = re.sub(r"\s+", " ", _PNAME_RE.sub(expand, chunk))
        out.append(chunk)
    text = "".join(out).strip()
    head = re.match(r"([A-Za-z]+)", text)
    if head is None or head.group(1).upper() != "SELECT":
        raise UnsupportedQueryError(f"unsupported query form: {(head.group(1) if head else text[:20])!r}")
    return text


# ---------------------------------------------------------------------------
# tokenizer + recursive-descent parser for the BGP subset

_TOKEN_SPEC = [
    ("IRI", _IRIREF),
    ("STRING", _STRING),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("DTYPE", r"\^\^"),
    ("VAR", r"[?$][A-Za-z_0-9][\w]*"),
    ("BNODE", r"_:[A-Za-z0-9_](?:[\w.\-]*[\w\-])?"),
    ("PNAME", r"[A-Za-z]?[\w.\-]*:[\w.%\-]*"),
    ("NUMBER", r"[+-]?(?:\d+\.\d*[eE][+-]?\d+|\.?\d+[eE][+-]?\d+|\d*\.\d+|\d+)"),
    ("NAME", r"[A-Za-z_][\w]*"),
    ("PUNCT", r"[{}().;,*\[\]]"),
    ("OP", r"\|\||&&|!=|<=|>=|[<>=!+\-/|^]"),
    ("WS", r"\s+"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{k}>{v})" for k, v in _TOKEN_SPEC), re.S)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QueryParseError(f"unparseable token {text[pos:pos + 10]!r}", len(text[:pos].encode("utf-8")))
        if m.lastgroup != "WS":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    return toks


def _unquote(s: str) -> str:
    if s[:3] in ('"""', "'''"):
        return unescape(s[3:-3])
    return unescape(s[1:-1])


@dataclass
class _Parser:
    text: str
    toks: list[_Tok]
    i: int = 0
    warnings: list[str] = field(default_factory=list)

    def offset(self, tok: _Tok | None = None) -> int:
        pos = tok.pos if tok is not None else len(self.text)
        return len(self.text[:pos].encode("utf-8"))

    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise QueryParseError("unexpected end of query", self.offset())
        self.i += 1
        return tok

    def error(self, tok: _Tok | None, what: str):
        shown = tok.text if tok is not None else "end of query"
        raise QueryParseError(f"{what}, got {shown!r}", self.offset(tok))

    def is_kw(self, tok: _Tok | None, *words: str) -> bool:
        return tok is not None and tok.kind == "NAME" and tok.text.upper() in words

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            self.error(tok, f"expected {text!r}")
        return tok

    # grammar --------------------------------------------------------------

    def parse(self) -> Query:
        tok = self.next()
        if not self.is_kw(tok, "SELECT"):
            if tok.kind == "NAME" and tok.text.upper() in ("ASK", "CONSTRUCT", "DESCRIBE"):
                raise UnsupportedQueryError(f"unsupported query form: {tok.text}")
            self.error(tok, "expected SELECT")
        distinct = False
        if self.is_kw(self.peek(), "DISTINCT", "REDUCED"):
            distinct = self.next().text.upper() == "DISTINCT"
        projection: list[str] = []
        star = False
        while True:
            tok = self.peek()
            if tok is None:
                self.error(tok, "expected WHERE")
            if tok.kind == "VAR":
                projection.append(self.next().text[1:])
            elif tok.text == "*":
                self.next()
                star = True
            elif tok.text == "(":
                raise UnsupportedQueryError("projection expressions / aggregates are not supported")
            else:
                break
        if not star and not projection:
            self.error(self.peek(), "expected projection")
        if self.is_kw(self.peek(), "WHERE"):
            self.next()
        if self.peek() is None or self.peek().text != "{":
            self.error(self.peek(), "expected '{'")
        open_tok = self.peek()
        patterns = self.group()
        self.modifiers()
        if not patterns:
            raise QueryParseError("empty WHERE block", self.offset(open_tok))
        names = {v for p in patterns for v in p.variables()}
        kept = [v for v in dict.fromkeys(projection) if v in names]
        if len(kept) < len(set(projection)):
            dropped = [v for v in projection if v not in names]
            self.warn(f"projection variable(s) {dropped} lost with stripped clauses")
            if not kept:
                raise QueryParseError("no projection variable survives in the basic graph pattern")
        return make_query(kept, patterns, distinct)

    def warn(self, msg: str):
        self.warnings.append(msg)
        log.warning(msg)

    def group(self) -> list[TriplePattern]:
        self.expect("{")
        out: list[TriplePattern] = []
        while True:
            tok = self.peek()
            if tok is None:
                self.error(tok, "expected '}'")
            if tok.text == "}":
                self.next()
                return out
            if tok.text == ".":
                self.next()
            elif tok.text == "{":
                out.extend(self.group())
                while self.is_kw(self.peek(), "UNION"):
                    self.next()
                    self.warn("UNION branch stripped")
                    self.skip_balanced("{", "}")
            elif self.is_kw(tok, "OPTIONAL", "MINUS"):
                self.next()
                self.warn(f"{tok.text.upper()} clause stripped")
                self.skip_balanced("{", "}")
            elif self.is_kw(tok, "FILTER"):
                self.next()
                self.warn("FILTER clause stripped")
                self.skip_constraint()
            elif self.is_kw(tok, "BIND", "VALUES", "SERVICE", "GRAPH"):
                raise UnsupportedQueryError(f"{tok.text.upper()} is not supported")
            else:
                out.extend(self.triples_block())

    def skip_balanced(self, open_: str, close: str):
        tok = self.next()
        if tok.text != open_:
            self.error(tok, f"expected {open_!r}")
        depth = 1
        while depth:
            tok = self.next()
            if tok.text == open_:
                depth += 1
            elif tok.text == close:
                depth -= 1

    def skip_constraint(self):
        tok = self.peek()
        if tok is not None and tok.text == "(":
            self.skip_balanced("(", ")")
            return
        if self.is_kw(tok, "NOT"):
            self.next()
            tok = self.peek()
        if self.is_kw(tok, "EXISTS"):
            self.next()
            self.skip_balanced("{", "}")
            return
        if tok is not None and tok.kind in ("NAME", "IRI", "PNAME"):
            self.next()
            self.skip_balanced("(", ")")
            return
        self.error(tok, "expected FILTER constraint")

    def triples_block(self) -> list[TriplePattern]:
        out = []
        subj = self.node("subject")
        while True:
            pred = self.node("predicate")
            while True:
                obj = self.node("object")
                out.append(TriplePattern(subj, pred, obj))
                if self.peek() is not None and self.peek().text == ",":
                    self.next()
                    continue
                break
            if self.peek() is not None and self.peek().text == ";":
                self.next()
                nxt = self.peek()
                if nxt is None or nxt.text in (".", "}"):
                    break
                continue
            break
        return out

    def node(self, role: str) -> Node:
        tok = self.next()
        if tok.kind == "VAR":
            return Variable(tok.text[1:])
        if tok.kind == "IRI":
            return Term.iri(unescape(tok.text[1:-1]))
        if tok.kind == "BNODE" and role != "predicate":
            return Variable("_" + tok.text[2:])
        if tok.kind == "NAME" and tok.text == "a" and role == "predicate":
            return Term.iri(RDF + "type")
        if role == "predicate":
            self.error(tok, "expected IRI or variable in predicate position")
        if tok.kind == "STRING" and role == "object":
            lex = _unquote(tok.text)
            nxt = self.peek()
            if nxt is not None and nxt.kind == "LANGTAG":
                self.next()
                return Term.literal(lex, lang=nxt.text[1:])
            if nxt is not None and nxt.kind == "DTYPE":
                self.next()
                dt = self.next()
                if dt.kind != "IRI":
                    self.error(dt, "expected datatype IRI")
                return Term.literal(lex, datatype=unescape(dt.text[1:-1]))
            return Term.literal(lex)
        if tok.kind == "NUMBER" and role == "object":
            t = tok.text
            if re.fullmatch(r"[+-]?\d+", t):
                dt = "integer"
            elif "e" in t.lower():
                dt = "double"
            else:
                dt = "decimal"
            return Term.literal(t, datatype=XSD + dt)
        if tok.kind == "NAME" and tok.text in ("true", "false") and role == "object":
            return Term.literal(tok.text, datatype=XSD + "boolean")
        self.error(tok, f"unexpected token in {role} position")

    def modifiers(self):
        while self.peek() is not None:
            tok = self.next()
            if self.is_kw(tok, "ORDER", "GROUP"):
                self.warn(f"{tok.text.upper()} BY stripped")
                by = self.next()
                if not self.is_kw(by, "BY"):
                    self.error(by, "expected BY")
                while self.peek() is not None and not self.is_kw(self.peek(), "LIMIT", "OFFSET", "ORDER", "GROUP", "HAVING"):
                    nxt = self.next()
                    if nxt.text == "(":
                        self.i -= 1
                        self.skip_balanced("(", ")")
            elif self.is_kw(tok, "LIMIT", "OFFSET"):
                self.warn(f"{tok.text.upper()} stripped")
                n = self.next()
                if n.kind != "NUMBER":
                    self.error(n, "expected integer")
            elif self.is_kw(tok, "HAVING"):
                raise UnsupportedQueryError("HAVING is not supported")
            else:
                self.error(tok, "unexpected trailing token")


def parse_query(normalized: str) -> Query:
    """Parse normalized query text into a :class:`Query`."""
    parser = _Parser(normalized, _tokenize(normalized))
    return parser.parse()


def load_query(raw: str, fixed_prefixes: Mapping[str, str] | None = None) -> Query:
    return parse_query(normalize(raw, fixed_prefixes))


def extract_entities(query: Query, include_predicates: bool = False) -> set[Term]:
    """IRI constants in subject/object positions (optionally predicates too)."""
    out = set()
    for pat in query.bgp:
        positions = (pat.subject, pat.predicate, pat.object) if include_predicates else (pat.subject, pat.object)
        for node in positions:
            if isinstance(node, Term) and node.kind is TermKind.IRI:
                out.add(node)
    return out


# ---------------------------------------------------------------------------
# workload and prefix files

RECORD_SEPARATOR = "###"


def read_workload(stream: IO[str] | Iterable[str]) -> list[str]:
    """Split a workload stream into raw query records on ``###`` lines."""
    records, current = [], []
    for line in stream:
        if line.strip() == RECORD_SEPARATOR:
            records.append("".join(current))
            current = []
        else:
            current.append(line)
    records.append("".join(current))
    return [r.strip() for r in records if r.strip()]


def write_workload(queries: Iterable[str | Query], out: IO[str]) -> None:
    first = True
    for q in queries:
        if not first:
            out.write(RECORD_SEPARATOR + "\n")
        out.write(str(q).strip() + "\n")
        first = False


@dataclass
class LoadedWorkload:
    queries: list[Query]
    rejected: list[tuple[int, str]]  # (record index, reason)
    duplicates: int


def load_workload(path: str | Path, fixed_prefixes: Mapping[str, str] | None = None) -> LoadedWorkload:
    with open(path, encoding="utf-8") as fh:
        records = read_workload(fh)
    return parse_workload(records, fixed_prefixes)


def parse_workload(records: Iterable[str], fixed_prefixes: Mapping[str, str] | None = None) -> LoadedWorkload:
    """Normalize and parse raw records; rejects are logged, exact duplicates folded."""
    queries: list[Query] = []
    seen: set[str] = set()
    rejected, dupes = [], 0
    for i, raw in enumerate(records):
        try:
            q = load_query(raw, fixed_prefixes)
        except QueryError as exc:
            log.warning("rejecting query record %d: %s", i, exc)
            rejected.append((i, str(exc)))
            continue
        if q.id in seen:
            dupes += 1
            continue
        seen.add(q.id)
        queries.append(q)
    return LoadedWorkload(queries, rejected, dupes)


def read_prefixes(stream: IO[str] | Iterable[str], base: Mapping[str, str] | None = None) -> PrefixMap:
    """Parse ``label=namespace`` lines on top of ``base`` (default map if None)."""
    out = dict(DEFAULT_PREFIXES if base is None else base)
    for lineno, line in enumerate(stream, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"prefix map line {lineno}: expected label=namespace")
        label, ns = (x.strip() for x in line.split("=", 1))
        label = label.rstrip(":")
        if ns.startswith("<") and ns.endswith(">"):
            ns = ns[1:-1]
        Term.iri(ns)
        out[label] = ns
    return out


def load_prefixes(path: str | Path | None) -> PrefixMap:
    if path is None:
        return dict(DEFAULT_PREFIXES)
    with open(path, encoding="utf-8") as fh:
        return read_prefixes(fh)


__all__ = [
    "DEFAULT_PREFIXES", "PrefixMap", "Query", "QueryError", "QueryParseError", "TriplePattern",
    "UnknownPrefixError", "UnsupportedQueryError", "Variable",
    "extract_entities", "load_prefixes", "load_query", "load_workload", "make_query", "normalize",
    "parse_query", "parse_workload", "read_prefixes", "read_workload", "render_query", "write_workload",
]
