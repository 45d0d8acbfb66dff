"""Synthetic knowledge graphs with Zipf-skewed entity popularity, plus query logs.

Queries are grown from real triples around a popularity-sampled anchor entity
(1 to 3 patterns: single lookups, paths and stars), so almost all of them are
answerable. The same exponent skews which of an entity's facts get asked about,
so logs revisit a few facts per entity as real ones do. A small configurable share is assembled from random constants
instead, mimicking the dead queries found in real logs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .query import load_query
from .store import KnowledgeGraph, Term, Triple

ENTITY_NS = "http://example.org/kg/entity/"
RELATION_NS = "http://example.org/kg/relation/"
PREFIXES = {"ent": ENTITY_NS, "rel": RELATION_NS}


def zipf_weights(n: int, skew: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** skew
    return w / w.sum()


def entity(i: int) -> Term:
    return Term.iri(f"{ENTITY_NS}E{i}")


def relation(j: int) -> Term:
    return Term.iri(f"{RELATION_NS}r{j}")


@dataclass
class SyntheticData:
    triples: list[tuple[int, int, int]]  # (entity, relation, entity) indices
    queries: list[str]                   # raw query texts with PREFIX headers
    answerable_by_construction: int

    def graph(self) -> KnowledgeGraph:
        return KnowledgeGraph.from_triples(Triple(entity(s), relation(p), entity(o)) for s, p, o in self.triples)


def _draw_triples(rng: np.random.Generator, entities: int, relations: int, n: int, ent_w: np.ndarray, rel_w: np.ndarray):
    cap = entities * (entities - 1 if entities > 1 else 1) * relations
    if n > cap:
        raise ValueError(f"cannot place {n} distinct triples on {entities} entities x {relations} relations")
    ent_cdf, rel_cdf = np.cumsum(ent_w), np.cumsum(rel_w)
    seen: set[tuple[int, int, int]] = set()
    out = []
    rounds = 0
    while len(out) < n:
        rounds += 1
        if rounds > 10_000:
            raise ValueError("triple generation did not converge; lower the skew or the triple count")
        k = max(64, 2 * (n - len(out)))
        s = np.minimum(np.searchsorted(ent_cdf, rng.random(k), side="right"), entities - 1)
        o = np.minimum(np.searchsorted(ent_cdf, rng.random(k), side="right"), entities - 1)
        p = np.minimum(np.searchsorted(rel_cdf, rng.random(k), side="right"), relations - 1)
        for key in zip(s.tolist(), p.tolist(), o.tolist()):
            if (key[0] == key[2] and entities > 1) or key in seen:
                continue
            seen.add(key)
            out.append(key)
            if len(out) == n:
                break
    return out


def _render(patterns, projection, rnd: random.Random) -> str:
    def node(x):
        kind, v = x
        if kind == "v":
            return f"?{v}"
        if kind == "e":
            return f"ent:E{v}"
        return f"rel:r{v}"

    header = [f"PREFIX ent: <{ENTITY_NS}>", f"PREFIX rel: <{RELATION_NS}>"]
    if rnd.random() < 0.2:
        header.append(header[rnd.randrange(2)])  # boilerplate duplicate, as in real logs
    body = " .\n  ".join(" ".join(node(x) for x in pat) for pat in patterns)
    proj = " ".join(f"?{v}" for v in projection)
    return "\n".join(header) + f"\nSELECT DISTINCT {proj} WHERE {{\n  {body} .\n}}\n"


def _pick(rnd: random.Random, options: list[int], skew: float) -> int:
    # facts earlier in an entity's list are asked about more often
    if skew == 0 or len(options) == 1:
        return rnd.choice(options)
    return rnd.choices(options, weights=(1.0 / (i + 1) ** skew for i in range(len(options))))[0]


def _grow_query(rnd: random.Random, anchor: int, incident, triples, skew: float = 0.0):
    """A 1-3 pattern query around ``anchor`` built from real triples, or None."""
    size = rnd.choice((1, 1, 2, 2, 3))
    shape = "path" if size == 1 or rnd.random() < 0.5 else "star"
    used: set[int] = set()
    var_of: dict[int, str] = {}
    patterns = []

    def term(ent):
        if ent == anchor:
            return ("e", ent)
        if ent not in var_of:
            var_of[ent] = f"v{len(var_of)}"
        return ("v", var_of[ent])

    frontier = anchor
    for _ in range(size):
        center = anchor if shape == "star" else frontier
        options = [t for t in incident[center] if t not in used]
        if not options:
            break
        tid = _pick(rnd, options, skew)
        used.add(tid)
        s, p, o = triples[tid]
        patterns.append((s, p, o))
        frontier = o if s == center else s
    if not patterns:
        return None
    rendered = [(term(s), ("r", p), term(o)) for s, p, o in patterns]
    variables = list(var_of.values())
    if not variables:
        return None
    # sometimes pin the far end of a path as a second constant
    if shape == "path" and len(variables) > 1 and rnd.random() < 0.25:
        far = [e for e, v in var_of.items() if v == variables[-1]][0]
        rendered = [tuple(("e", far) if x == ("v", variables[-1]) else x for x in pat) for pat in rendered]
        variables = variables[:-1]
    projection = variables if rnd.random() < 0.3 else variables[-1:]
    return rendered, projection


def make_synthetic(
    entities: int,
    relations: int,
    triples: int,
    queries: int,
    skew: float = 1.0,
    rng_seed: int = 0,
    dead_fraction: float = 0.05,
    relation_skew: float | None = None,
    facet_skew: float | None = None,
) -> SyntheticData:
    """``relation_skew`` and ``facet_skew`` (which facts of an entity get asked) default to ``skew``."""
    if min(entities, relations, triples, queries) < 1:
        raise ValueError("all counts must be >= 1")
    relation_skew = skew if relation_skew is None else relation_skew
    facet_skew = skew if facet_skew is None else facet_skew
    if min(skew, relation_skew, facet_skew) < 0:
        raise ValueError("skew must be >= 0")
    if not 0 <= dead_fraction < 0.1:
        raise ValueError("dead_fraction must be in [0, 0.1)")
    rng = np.random.default_rng(rng_seed)
    rnd = random.Random(int(rng.integers(2**63)))
    ent_w = zipf_weights(entities, skew)
    rel_w = zipf_weights(relations, relation_skew)
    facts = _draw_triples(rng, entities, relations, triples, ent_w, rel_w)

    incident: dict[int, list[int]] = {}
    for tid, (s, _, o) in enumerate(facts):
        incident.setdefault(s, []).append(tid)
        if o != s:
            incident.setdefault(o, []).append(tid)
    anchors = np.array(sorted(incident))
    anchor_cdf = np.cumsum(ent_w[anchors] / ent_w[anchors].sum())

    out: list[str] = []
    seen: set[str] = set()
    live = 0
    n_dead = int(round(dead_fraction * queries))
    attempts = 0
    while len(out) < queries:
        attempts += 1
        if attempts > 50 * queries + 1000:
            raise ValueError("could not generate enough distinct queries; increase the graph size")
        dead = len(out) >= queries - n_dead
        if dead:
            a, b = rnd.randrange(entities), rnd.randrange(entities)
            grown = ([(("e", a), ("r", rnd.randrange(relations)), ("v", "v0")),
                      (("v", "v0"), ("r", rnd.randrange(relations)), ("e", b))], ["v0"])
        else:
            k = min(int(np.searchsorted(anchor_cdf, rnd.random(), side="right")), len(anchors) - 1)
            grown = _grow_query(rnd, int(anchors[k]), incident, facts, facet_skew)
            if grown is None:
                continue
        text = _render(*grown, rnd)
        qid = load_query(text, PREFIXES).id
        if qid in seen:
            continue
        seen.add(qid)
        out.append(text)
        live += not dead
    order = list(range(len(out)))
    rnd.shuffle(order)
    return SyntheticData(facts, [out[i] for i in order], live)


def generate_synthetic(
    entities: int,
    relations: int,
    triples: int,
    queries: int,
    skew: float,
    rng_seed: int,
    dataset_path: str | Path,
    workload_path: str | Path,
    dead_fraction: float = 0.05,
    relation_skew: float | None = None,
    facet_skew: float | None = None,
) -> SyntheticData:
    """Write an N-Triples dataset and a ``###``-separated workload file."""
    data = make_synthetic(entities, relations, triples, queries, skew, rng_seed, dead_fraction, relation_skew, facet_skew)
    with open(dataset_path, "w", encoding="utf-8", newline="\n") as fh:
        for s, p, o in data.triples:
            fh.write(f"<{ENTITY_NS}E{s}> <{RELATION_NS}r{p}> <{ENTITY_NS}E{o}> .\n")
    with open(workload_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n###\n".join(q.rstrip("\n") for q in data.queries))
        fh.write("\n")
    return data


def write_prefix_file(path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label, ns in PREFIXES.items():
            fh.write(f"{label}={ns}\n")
