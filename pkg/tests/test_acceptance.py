"""Acceptance criteria, one PASS/FAIL line each.

The lines are printed as the tests run and repeated in the pytest terminal
summary, so ``pytest tests/test_acceptance.py`` shows them without ``-s``.
"""

import math
import random
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import beta

from conftest import synthetic_instance
from test_engine import as_set, brute_force
from kgcoreset.coreset import coreset_cost, required_sample_size, sample_coreset
from kgcoreset.engine import evaluate_bgp, relevant_triples
from kgcoreset.experiments import BenchmarkConfig, budget_sweep, build_benchmark, compare_methods, run_method
from kgcoreset.metrics import answer_f1, coverage
from kgcoreset.pipeline import RunConfig, run_pipeline
from kgcoreset.query import TriplePattern, Variable, make_query
from kgcoreset.sensitivity import compute_sensitivity, full_cost, sampling_distribution
from kgcoreset.store import KnowledgeGraph, Term, Triple
from kgcoreset.synthetic import generate_synthetic, write_prefix_file

RESULTS: list[str] = []


def verdict(label: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def lemma_instance():
    graph, queries = synthetic_instance(100, 10, 1000, 50, 1.0, 7)
    table = compute_sensitivity(graph, queries)
    return graph, queries, table, sampling_distribution(table)


def test_criterion_1_total_sensitivity():
    rnd = random.Random(1)
    start = time.perf_counter()
    worst = 0.0
    for i in range(50):
        triples = rnd.randint(200, 10_000)
        entities = rnd.randint(max(30, triples // 40), max(60, triples // 10))
        graph, queries = synthetic_instance(entities, rnd.randint(5, 60), triples, rnd.randint(10, 200),
                                             rnd.uniform(0.0, 1.5), i)
        table = compute_sensitivity(graph, queries)
        worst = max(worst, abs(table.total - table.answerable_count))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and elapsed < 60
    assert verdict("1 total sensitivity", ok, f"max |S - answerable| = {worst:.2e} over 50 instances, {elapsed:.1f}s")


def test_criterion_2_unbiasedness_and_variance(lemma_instance):
    graph, _, table, dist = lemma_instance
    start = time.perf_counter()
    m, n = 64, 2000
    costs = np.array([coreset_cost(sample_coreset(dist, table, m, seed), table) for seed in range(n)])
    elapsed = time.perf_counter() - start
    target = full_cost(table)
    se = costs.std(ddof=1) / math.sqrt(n)
    z = (costs.mean() - target) / se
    bound = table.total / m * target**2
    var = costs.var(ddof=1)
    ok_mean = abs(z) <= 3 and elapsed < 120
    ok_var = var <= 1.05 * bound
    verdict("2 unbiasedness", ok_mean,
            f"mean {costs.mean():.3f} vs cost(G,Q) {target:.0f}, z = {z:+.2f}, {elapsed:.1f}s")
    verdict("2 variance bound", ok_var, f"var {var:.1f} <= 1.05 * {bound:.1f}")
    assert ok_mean and ok_var


def test_criterion_3_concentration(lemma_instance):
    graph, _, table, dist = lemma_instance
    eps, delta, trials = 0.2, 0.1, 500
    m = required_sample_size(eps, delta, table.answerable_count)
    target = full_cost(table)
    start = time.perf_counter()
    failures = sum(abs(coreset_cost(sample_coreset(dist, table, m, seed), table) - target) > eps * target
                   for seed in range(trials))
    elapsed = time.perf_counter() - start
    # one-sided Clopper-Pearson upper limit at 99%
    upper = 1.0 if failures == trials else float(beta.ppf(0.99, failures + 1, trials - failures))
    ok = upper <= delta and elapsed < 300
    assert verdict("3 concentration", ok,
                   f"m = {m}, {failures}/{trials} failures, 99% upper bound {upper:.4f} <= {delta}, {elapsed:.1f}s")


def _random_case(rnd: random.Random):
    nodes = [Term.iri(f"http://ex.org/n{i}") for i in range(rnd.randint(2, 12))]
    preds = [Term.iri(f"http://ex.org/p{i}") for i in range(rnd.randint(1, 4))]
    graph = KnowledgeGraph.from_triples(
        Triple(rnd.choice(nodes), rnd.choice(preds), rnd.choice(nodes)) for _ in range(rnd.randint(0, 200)))
    names = ["a", "b", "c"][: rnd.randint(1, 3)]

    def slot(pool):
        return Variable(rnd.choice(names)) if rnd.random() < 0.6 else rnd.choice(pool)

    pats = [TriplePattern(slot(nodes), slot(preds), slot(nodes)) for _ in range(rnd.randint(1, 3))]
    used = sorted({x.name for p in pats for x in p if isinstance(x, Variable)})
    return graph, make_query(rnd.sample(used, rnd.randint(0, len(used))), pats)


def test_criterion_4_oracle_equivalence():
    rnd = random.Random(4)
    mismatches = 0
    for _ in range(200):
        graph, query = _random_case(rnd)
        solutions, relevant = brute_force(graph, query)
        if as_set(evaluate_bgp(graph, query)) != as_set(solutions) or relevant_triples(graph, query) != relevant:
            mismatches += 1
    assert verdict("4 oracle equivalence", mismatches == 0, f"{200 - mismatches}/200 cases match brute force")


def test_criterion_5_metric_sanity(lemma_instance):
    graph, queries, table, _ = lemma_instance
    answerable = [q for q in queries if table.tq_sizes[q.id] > 0]
    empty = KnowledgeGraph.from_triples([])
    full_cov, full_f1 = coverage(graph, answerable), answer_f1(graph, graph, answerable)[2]
    empty_cov, empty_f1 = coverage(empty, answerable), answer_f1(empty, graph, answerable)[2]
    ok = (full_cov, full_f1, empty_cov, empty_f1) == (1.0, 1.0, 0.0, 0.0)
    assert verdict("5 metric sanity", ok,
                   f"full: coverage {full_cov}, F1 {full_f1}; empty: coverage {empty_cov}, F1 {empty_f1}")


@pytest.fixture(scope="module")
def benchmark():
    return build_benchmark(BenchmarkConfig())


@pytest.fixture(scope="module")
def ablation(benchmark):
    start = time.perf_counter()
    rows = compare_methods(benchmark, RunConfig(budget_fraction=0.05))
    return rows, time.perf_counter() - start


ABLATION_GAPS = [
    ("corekg", "corekg-global"),
    ("corekg-global", "corekg-uniform"),
    ("corekg", "corekg-unweighted"),
]


@pytest.mark.parametrize("hi,lo", ABLATION_GAPS, ids=[f"{a}>{b}" for a, b in ABLATION_GAPS])
def test_criterion_6_ablation_ordering(ablation, hi, lo):
    rows, elapsed = ablation
    a, b = rows[hi], rows[lo]
    gaps = (100 * (a.coverage - b.coverage), 100 * (a.f1 - b.f1))
    ok = min(gaps) >= 5 and elapsed < 600
    assert verdict(f"6 ablation {hi} > {lo}", ok,
                   f"coverage {100 * a.coverage:.2f} vs {100 * b.coverage:.2f} (gap {gaps[0]:+.2f}), "
                   f"F1 {100 * a.f1:.2f} vs {100 * b.f1:.2f} (gap {gaps[1]:+.2f}); run took {elapsed:.0f}s")


def test_unweighted_ablation_shows_up_in_cost(benchmark):
    # coverage and F1 never read weights, so the weighting ablation is only visible in the cost estimate
    errors = {}
    for method in ("corekg", "corekg-unweighted"):
        results, _ = run_method(benchmark, method, RunConfig(budget_fraction=0.05))
        rel = [abs(r.report.coreset_cost - r.report.workload_cost) / r.report.workload_cost
               for r in results if r.report.coreset_cost is not None]
        errors[method] = 100 * sum(rel) / len(rel)
    ok = errors["corekg"] + 5 <= errors["corekg-unweighted"]
    assert verdict("supplementary: corekg-unweighted cost bias (not a substitute for 6)", ok,
                   f"mean relative cost error {errors['corekg']:.2f}% vs {errors['corekg-unweighted']:.0f}%")


def test_criterion_7_budget_sweep(benchmark):
    fractions = (0.01, 0.05, 0.10, 0.25)
    sweep = budget_sweep(benchmark, fractions, range(5), base=RunConfig())
    cov = [100 * sweep[f][0] for f in fractions]
    f1 = [100 * sweep[f][1] for f in fractions]
    worst_drop = max(max(x[i] - x[i + 1] for i in range(len(x) - 1)) for x in (cov, f1))
    ok = worst_drop <= 1.0
    shown = ", ".join(f"{100 * f:g}%: {c:.2f}/{v:.2f}" for f, c, v in zip(fractions, cov, f1))
    assert verdict("7 budget sweep", ok, f"coverage/F1 {shown}; largest drop {max(worst_drop, 0):.2f}")


def test_criterion_8_determinism(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    generate_synthetic(80, 200, 800, 600, 1.0, 2, data / "g.nt", data / "w.txt", relation_skew=0.0, facet_skew=2.0)
    write_prefix_file(data / "p.txt")
    base = RunConfig(dataset=str(data / "g.nt"), workload=str(data / "w.txt"), prefixes=str(data / "p.txt"),
                     users=5, budget_fraction=0.05, workers=1)
    differing = []
    for method in ("corekg", "corekg-uniform", "ppr"):
        dirs = [tmp_path / f"{method}-{i}" for i in range(2)]
        for d in dirs:
            run_pipeline(replace(base, method=method, out=str(d)))
        names = sorted(p.name for p in dirs[0].iterdir())
        assert names == sorted(p.name for p in dirs[1].iterdir())
        differing += [f"{method}/{n}" for n in names if (dirs[0] / n).read_bytes() != (dirs[1] / n).read_bytes()]
    assert verdict("8 determinism", not differing,
                   "repeated runs byte-identical" if not differing else f"differ: {differing}")
