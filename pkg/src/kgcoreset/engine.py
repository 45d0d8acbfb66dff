"""Basic graph pattern evaluation over a :class:`KnowledgeGraph`.

Evaluation is a nested-loop backtracking join. At every step the pattern with
the fewest candidate triples (given the bindings so far) is expanded next,
which is cheap to decide because the store counts prefix ranges in O(log n).
"""

from __future__ import annotations

from typing import Iterable, Iterator, Literal, Sequence

from .query import Query, Variable
from .store import ANY, KnowledgeGraph, Term, lookup_pattern

Binding = dict[str, Term]
AnswerSet = set[tuple[Term, ...]]
RelevanceMode = Literal["join", "pattern"]

RELEVANCE_MODES = ("join", "pattern")


def _compile(graph: KnowledgeGraph, query: Query):
    """Map patterns onto term ids and variable slots; ``None`` if a constant is unknown."""
    slots = {name: i for i, name in enumerate(query.variables())}
    compiled = []
    for pat in query.bgp:
        row = []
        for node in pat:
            if isinstance(node, Variable):
                row.append((True, slots[node.name]))
            else:
                tid = graph.term_id(node)
                if tid is None:
                    return None, slots
                row.append((False, tid))
        compiled.append(tuple(row))
    return compiled, slots


def _solutions(
    graph: KnowledgeGraph,
    query: Query,
    order: Sequence[int] | None = None,
    pin: tuple[int, tuple[int, int, int, int]] | None = None,
) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Yield ``(assignment, matched triple id per pattern)`` for every solution.

    ``assignment`` holds term ids indexed like ``query.variables()``. With
    ``order`` the patterns are joined in that fixed order instead of greedily.
    ``pin = (k, row)`` restricts pattern ``k`` to the store row ``row``.
    """
    pats, slots = _compile(graph, query)
    if pats is None:
        return
    assign: list[int | None] = [None] * len(slots)
    tids: list[int] = [-1] * len(pats)
    remaining = list(range(len(pats)))
    if pin is not None:
        k, row = pin
        for value, (is_var, v) in zip(row, pats[k]):
            if not is_var:
                if value != v:
                    return
            elif assign[v] is None:
                assign[v] = value
            elif assign[v] != value:
                return
        tids[k] = row[3]
        remaining.remove(k)

    def key_of(k):
        return tuple(assign[v] if is_var and assign[v] is not None else (ANY if is_var else v)
                     for is_var, v in pats[k])

    def rec(depth: int):
        if not remaining:
            yield tuple(assign), tuple(tids)
            return
        if order is not None:
            best = order[depth]
            key = key_of(best)
        else:
            best, key, best_n = None, None, -1
            for k in remaining:
                kk = key_of(k)
                n = graph.count_ids(*kk)
                if n == 0:
                    return
                if best is None or n < best_n:
                    best, key, best_n = k, kk, n
        remaining.remove(best)
        pat = pats[best]
        for row in graph.match_ids(*key):
            newly = []
            ok = True
            for value, (is_var, v) in zip(row, pat):
                if not is_var:
                    continue
                cur = assign[v]
                if cur is None:
                    assign[v] = value
                    newly.append(v)
                elif cur != value:
                    ok = False
                    break
            if ok:
                tids[best] = row[3]
                yield from rec(depth + 1)
            for v in newly:
                assign[v] = None
        remaining.append(best)
        remaining.sort()

    yield from rec(0)


def evaluate_bgp(graph: KnowledgeGraph, query: Query, order: Sequence[int] | None = None) -> list[Binding]:
    """All solution mappings of the query's BGP (each distinct mapping once)."""
    names = query.variables()
    terms = graph.terms
    return [
        {name: terms[i] for name, i in zip(names, assignment)}
        for assignment, _ in _solutions(graph, query, order)
    ]


def _join_relevant(graph: KnowledgeGraph, query: Query) -> set[int]:
    # A triple is relevant iff pinning it to some pattern still leaves a solution.
    # Checking one witness per candidate avoids enumerating every solution,
    # which explodes on loose path or star queries.
    pats, _ = _compile(graph, query)
    if pats is None:
        return set()
    out: set[int] = set()
    for k, pat in enumerate(pats):
        key = tuple(ANY if is_var else v for is_var, v in pat)
        for row in graph.match_ids(*key):
            if row[3] in out:
                continue
            witness = next(_solutions(graph, query, pin=(k, row)), None)
            if witness is not None:
                out.update(witness[1])
    return out


def relevant_triples(graph: KnowledgeGraph, query: Query, mode: RelevanceMode = "join") -> set[int]:
    """The relevant-triple set of ``query``.

    ``join``: triples that instantiate some pattern under a full solution.
    ``pattern``: union of per-pattern matches, ignoring joins (a superset).
    """
    if mode == "join":
        return _join_relevant(graph, query)
    if mode == "pattern":
        out = set()
        for pat in query.bgp:
            out |= lookup_pattern(graph, pat)
        return out
    raise ValueError(f"unknown relevance mode {mode!r}")


def project_answers(bindings: Iterable[Binding], projection: Sequence[str]) -> AnswerSet:
    """Distinct projected tuples; an empty projection means all variables, sorted by name."""
    out: AnswerSet = set()
    for b in bindings:
        names = projection or sorted(b)
        try:
            out.add(tuple(b[v] for v in names))
        except KeyError as exc:
            raise ValueError(f"projection variable {exc.args[0]!r} is unbound") from None
    return out


def answers(graph: KnowledgeGraph, query: Query) -> AnswerSet:
    """``project_answers(evaluate_bgp(graph, query), query.projection)`` without the dicts."""
    names = query.variables()
    proj = query.projection or tuple(sorted(names))
    idx = [names.index(v) for v in proj]
    terms = graph.terms
    seen = {tuple(a[i] for i in idx) for a, _ in _solutions(graph, query)}
    return {tuple(terms[i] for i in row) for row in seen}
