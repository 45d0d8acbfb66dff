"""In-memory RDF triple store.

Terms are interned to dense integers and every distinct triple gets a dense
``TripleId`` in insertion order. Three sorted permutation indexes (SPO, POS,
OSP) give a prefix-scan path for every combination of bound positions.
"""

from __future__ import annotations

import enum
import gzip
import io
import logging
import re
import sys
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

log = logging.getLogger(__name__)


class TermKind(str, enum.Enum):
    IRI = "iri"
    LITERAL = "literal"
    BNODE = "bnode"


_WS = re.compile(r"\s")


@dataclass(frozen=True, order=True)
class Term:
    """An RDF term. Equality is exact on every lexical component."""

    kind: TermKind
    value: str
    datatype: str | None = None
    lang: str | None = None

    def __post_init__(self):
        if self.kind is TermKind.IRI:
            if not self.value or _WS.search(self.value):
                raise ValueError(f"invalid IRI: {self.value!r}")
        elif self.kind is TermKind.BNODE:
            if not self.value:
                raise ValueError("blank node label must be non-empty")
        if self.kind is not TermKind.LITERAL and (self.datatype or self.lang):
            raise ValueError("only literals carry a datatype or language tag")
        if self.datatype is not None and self.lang is not None:
            raise ValueError("literal cannot have both datatype and language tag")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(TermKind.IRI, value)

    @classmethod
    def literal(cls, value: str, datatype: str | None = None, lang: str | None = None) -> "Term":
        return cls(TermKind.LITERAL, value, datatype, lang)

    @classmethod
    def bnode(cls, label: str) -> "Term":
        return cls(TermKind.BNODE, label)

    @property
    def is_iri(self) -> bool:
        return self.kind is TermKind.IRI

    @property
    def is_literal(self) -> bool:
        return self.kind is TermKind.LITERAL

    @property
    def is_bnode(self) -> bool:
        return self.kind is TermKind.BNODE

    def n3(self) -> str:
        """N-Triples serialization of this term."""
        if self.kind is TermKind.IRI:
            return f"<{escape_iri(self.value)}>"
        if self.kind is TermKind.BNODE:
            return f"_:{self.value}"
        text = f'"{escape_string(self.value)}"'
        if self.lang is not None:
            return f"{text}@{self.lang}"
        if self.datatype is not None:
            return f"{text}^^<{escape_iri(self.datatype)}>"
        return text

    def __str__(self) -> str:
        return self.n3()


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not self.predicate.is_iri:
            raise ValueError(f"predicate must be an IRI, got {self.predicate}")
        if self.subject.is_literal:
            raise ValueError(f"subject cannot be a literal, got {self.subject}")

    def __iter__(self) -> Iterator[Term]:
        return iter((self.subject, self.predicate, self.object))

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


# ---------------------------------------------------------------------------
# escaping

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_ESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))", re.S)


def unescape(text: str) -> str:
    """Decode N-Triples / SPARQL string and ``\\u`` escapes."""
    if "\\" not in text:
        return text

    def sub(m: re.Match) -> str:
        if m.group(1) or m.group(2):
            return chr(int(m.group(1) or m.group(2), 16))
        ch = m.group(3)
        if ch not in _ESCAPES:
            raise ValueError(f"invalid escape sequence \\{ch}")
        return _ESCAPES[ch]

    return _ESCAPE_RE.sub(sub, text)


def escape_string(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def escape_iri(text: str) -> str:
    out = []
    for ch in text:
        if ch in '<>"{}|^`\\' or ord(ch) <= 0x20:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


# ---------------------------------------------------------------------------
# the graph


class _Var:
    """Wildcard marker for :meth:`KnowledgeGraph.match_ids`."""

    __slots__ = ()

    def __repr__(self):
        return "ANY"


ANY = _Var()


@dataclass
class KnowledgeGraph:
    """Immutable-after-load triple store with interned terms."""

    terms: list[Term] = field(default_factory=list)
    term_ids: dict[Term, int] = field(default_factory=dict)
    triples: list[tuple[int, int, int]] = field(default_factory=list)
    malformed: int = 0

    def __post_init__(self):
        self._triple_ids: dict[tuple[int, int, int], int] = {}
        for tid, key in enumerate(self.triples):
            self._triple_ids[key] = tid
        self._build_indexes()

    # construction ---------------------------------------------------------

    @classmethod
    def from_triples(cls, triples: Iterable[Triple], malformed: int = 0) -> "KnowledgeGraph":
        terms: list[Term] = []
        term_ids: dict[Term, int] = {}
        keys: list[tuple[int, int, int]] = []
        seen: set[tuple[int, int, int]] = set()

        def intern(term: Term) -> int:
            tid = term_ids.get(term)
            if tid is None:
                tid = term_ids[term] = len(terms)
                terms.append(term)
            return tid

        for t in triples:
            key = (intern(t.subject), intern(t.predicate), intern(t.object))
            if key not in seen:
                seen.add(key)
                keys.append(key)
        return cls(terms=terms, term_ids=term_ids, triples=keys, malformed=malformed)

    def _build_indexes(self):
        # each index row is (a, b, c, triple_id) in its permutation order
        self._spo = sorted((s, p, o, i) for i, (s, p, o) in enumerate(self.triples))
        self._pos = sorted((p, o, s, i) for i, (s, p, o) in enumerate(self.triples))
        self._osp = sorted((o, s, p, i) for i, (s, p, o) in enumerate(self.triples))
        self._nodes = {k for s, _, o in self.triples for k in (s, o)}

    # basic accessors ------------------------------------------------------

    def __len__(self) -> int:
        return len(self.triples)

    def triple(self, tid: int) -> Triple:
        s, p, o = self.triples[tid]
        return Triple(self.terms[s], self.terms[p], self.terms[o])

    def __iter__(self) -> Iterator[Triple]:
        for tid in range(len(self.triples)):
            yield self.triple(tid)

    def term_id(self, term: Term) -> int | None:
        return self.term_ids.get(term)

    def triple_id(self, triple: Triple) -> int | None:
        ids = [self.term_ids.get(x) for x in triple]
        if None in ids:
            return None
        return self._triple_ids.get(tuple(ids))

    def triple_id_by_ids(self, s: int, p: int, o: int) -> int | None:
        return self._triple_ids.get((s, p, o))

    def node_terms(self) -> set[Term]:
        """Terms occurring in subject or object position."""
        return {self.terms[i] for i in self._nodes}

    def predicate_terms(self) -> set[Term]:
        return {self.terms[p] for _, p, _ in self.triples}

    def has_node(self, term: Term) -> bool:
        i = self.term_ids.get(term)
        return i is not None and i in self._nodes

    # pattern matching -----------------------------------------------------

    def _index_for(self, s, p, o):
        """Pick the permutation and bound-prefix for a pattern over term ids."""
        bs, bp, bo = s is not ANY, p is not ANY, o is not ANY
        if bs and bp:
            return self._spo, (s, p, o) if bo else (s, p), (0, 1, 2)
        if bp:
            return self._pos, (p, o) if bo else (p,), (2, 0, 1)
        if bo:
            return self._osp, (o, s) if bs else (o,), (1, 2, 0)
        if bs:
            return self._spo, (s,), (0, 1, 2)
        return self._spo, (), (0, 1, 2)

    def _range(self, index, prefix) -> tuple[int, int]:
        if not prefix:
            return 0, len(index)
        lo = bisect_left(index, prefix)
        hi = bisect_left(index, prefix[:-1] + (prefix[-1] + 1,))
        return lo, hi

    def count_ids(self, s=ANY, p=ANY, o=ANY) -> int:
        """Number of triples matching the bound positions (term ids or ANY)."""
        index, prefix, _ = self._index_for(s, p, o)
        lo, hi = self._range(index, prefix)
        return hi - lo

    def match_ids(self, s=ANY, p=ANY, o=ANY) -> Iterator[tuple[int, int, int, int]]:
        """Yield ``(s, p, o, triple_id)`` for triples matching the bound positions."""
        index, prefix, (si, pi, oi) = self._index_for(s, p, o)
        lo, hi = self._range(index, prefix)
        for k in range(lo, hi):
            row = index[k]
            yield row[si], row[pi], row[oi], row[3]


def lookup_pattern(graph: KnowledgeGraph, pattern) -> set[int]:
    """TripleIds of triples agreeing with every bound position of ``pattern``.

    ``pattern`` is any 3-sequence (or TriplePattern) whose items are either
    :class:`Term` or a variable. Unknown constant terms give the empty set. A
    variable repeated inside the pattern must bind to the same term.
    """
    positions = tuple(pattern)
    bound: list = []
    var_positions: dict[str, list[int]] = {}
    for i, item in enumerate(positions):
        if isinstance(item, Term):
            tid = graph.term_id(item)
            if tid is None:
                return set()
            bound.append(tid)
        else:
            bound.append(ANY)
            name = getattr(item, "name", None)
            if name is not None:
                var_positions.setdefault(name, []).append(i)
    repeats = [idx for idx in var_positions.values() if len(idx) > 1]
    out = set()
    for row in graph.match_ids(*bound):
        if all(len({row[i] for i in idx}) == 1 for idx in repeats):
            out.add(row[3])
    return out


# ---------------------------------------------------------------------------
# N-Triples I/O

_IRI = r"<((?:[^<>\"{}|^`\\\x00-\x20]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*)>"
_BNODE = r"_:([A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)"
_LITERAL = r"\"((?:[^\"\\\n\r]|\\.)*)\"(?:@([A-Za-z]+(?:-[A-Za-z0-9]+)*)|\^\^" + _IRI + r")?"
_LINE_RE = re.compile(
    r"^\s*(?:" + _IRI + "|" + _BNODE + r")\s*"
    + _IRI + r"\s*"
    + r"(?:" + _IRI + "|" + _BNODE + "|" + _LITERAL + r")\s*\.\s*(?:#.*)?$"
)


class NTriplesError(ValueError):
    pass


def parse_line(line: str) -> Triple | None:
    """Parse one N-Triples line; ``None`` for blanks and comments."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    m = _LINE_RE.match(line)
    if m is None:
        raise NTriplesError(f"malformed N-Triples line: {line.rstrip()!r}")
    s_iri, s_bn, p_iri, o_iri, o_bn, lit, lang, dt = m.groups()
    try:
        subj = Term.iri(unescape(s_iri)) if s_iri is not None else Term.bnode(s_bn)
        pred = Term.iri(unescape(p_iri))
        if o_iri is not None:
            obj = Term.iri(unescape(o_iri))
        elif o_bn is not None:
            obj = Term.bnode(o_bn)
        else:
            obj = Term.literal(unescape(lit), unescape(dt) if dt is not None else None, lang)
    except ValueError as exc:
        raise NTriplesError(f"malformed N-Triples line: {line.rstrip()!r} ({exc})") from exc
    return Triple(subj, pred, obj)


def parse_ntriples(stream: IO[str] | Iterable[str], strict: bool = False, report: IO[str] | None = None) -> KnowledgeGraph:
    """Load a graph from an N-Triples text stream.

    Malformed lines are skipped and counted (``graph.malformed``) unless
    ``strict`` is set, in which case the first one raises :class:`NTriplesError`.
    """
    report = sys.stderr if report is None else report
    skipped = 0

    def triples():
        nonlocal skipped
        for lineno, line in enumerate(stream, 1):
            try:
                t = parse_line(line)
            except NTriplesError as exc:
                if strict:
                    raise NTriplesError(f"line {lineno}: {exc}") from None
                skipped += 1
                print(f"skipping line {lineno}: {exc}", file=report)
                continue
            if t is not None:
                yield t

    graph = KnowledgeGraph.from_triples(triples())
    graph.malformed = skipped
    if skipped:
        print(f"{skipped} malformed line(s) skipped", file=report)
    return graph


def open_text(path: str | Path) -> IO[str]:
    """Open a UTF-8 text file, transparently decompressing gzip (by magic bytes)."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def load_ntriples(path: str | Path, strict: bool = False, report: IO[str] | None = None) -> KnowledgeGraph:
    with open_text(path) as fh:
        return parse_ntriples(fh, strict=strict, report=report)


def serialize_ntriples(triples: Iterable[Triple] | KnowledgeGraph, out: IO[str]) -> int:
    n = 0
    for t in triples:
        out.write(t.n3())
        out.write("\n")
        n += 1
    return n


def subgraph(graph: KnowledgeGraph, triple_ids: Sequence[int]) -> KnowledgeGraph:
    """A new graph holding the given triples of ``graph`` (ids ascending, deduplicated)."""
    n = len(graph)
    for tid in triple_ids:
        if not 0 <= tid < n:
            raise KeyError(f"unknown triple id {tid}")
    return KnowledgeGraph.from_triples(graph.triple(tid) for tid in sorted(set(triple_ids)))
