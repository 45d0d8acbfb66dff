"""End-to-end driver: load -> split/profile users -> summarize -> evaluate -> report."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from .baselines import PprConfig, ppr_scores, ppr_summary, strip_weights, uniform_coreset, uniform_coreset_budget
from .coreset import (
    Entry,
    WeightedSummary,
    coreset_cost,
    materialize_summary_graph,
    read_summary_tsv,
    required_sample_size,
    sample_coreset,
    sample_coreset_budget,
    write_summary_manifest,
    write_summary_tsv,
)
from .engine import RELEVANCE_MODES, AnswerSet, answers
from .metrics import (
    AggregateReport,
    CoverageWeights,
    UserReport,
    aggregate_users,
    dump_json,
    evaluate_summary,
    write_csv,
)
from .query import LoadedWorkload, Query, load_prefixes, load_workload
from .sensitivity import SensitivityTable, compute_sensitivity, full_cost, sampling_distribution
from .store import KnowledgeGraph, load_ntriples
from .workload import Workload, build_workloads, derive_seed, read_profiles, split_workload, write_profiles

log = logging.getLogger(__name__)

METHODS = ("corekg", "corekg-global", "corekg-uniform", "corekg-unweighted", "ppr")

EXIT_OK, EXIT_CONFIG, EXIT_NO_SIGNAL, EXIT_IO = 0, 2, 3, 1


class ConfigError(ValueError):
    pass


class NoUsersWithSignal(RuntimeError):
    pass


@dataclass
class RunConfig:
    dataset: str | None = None
    workload: str | None = None
    prefixes: str | None = None
    users: int = 15
    seeds_per_user: int = 5
    split: float = 0.8
    method: str = "corekg"
    samples: int | None = None
    epsilon: float | None = None
    delta: float | None = None
    budget: int | None = None
    budget_fraction: float | None = None
    relevance: str = "join"
    rng_seed: int = 0
    out: str = "out"
    workers: int | None = None

    def validate(self, sampling: bool = True) -> "RunConfig":
        """Raise ConfigError on a bad configuration; ``sampling=False`` skips the method checks."""
        if not 0 < self.split < 1:
            raise ConfigError("--split must be in (0, 1)")
        if self.users < 1 or self.seeds_per_user < 1:
            raise ConfigError("--users and --seeds-per-user must be >= 1")
        if self.relevance not in RELEVANCE_MODES:
            raise ConfigError(f"--relevance must be one of {', '.join(RELEVANCE_MODES)}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if sampling:
            self._validate_sampling()
        return self

    def _validate_sampling(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        modes = [self.samples is not None,
                 self.epsilon is not None or self.delta is not None,
                 self.budget is not None or self.budget_fraction is not None]
        if sum(modes) != 1:
            raise ConfigError("set exactly one of --samples, (--epsilon, --delta) or --budget")
        if self.budget is not None and self.budget_fraction is not None:
            raise ConfigError("give the budget either as a count or as a percentage")
        if modes[1] and (self.epsilon is None or self.delta is None):
            raise ConfigError("--epsilon and --delta must be given together")
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ConfigError(f"--{name} must be in (0, 1)")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("--samples must be >= 1")
        if self.budget is not None and self.budget < 1:
            raise ConfigError("--budget must be >= 1")
        if self.budget_fraction is not None and not 0 < self.budget_fraction <= 1:
            raise ConfigError("budget percentage must be in (0, 100]")
        if self.method == "ppr" and not modes[2]:
            raise ConfigError("the ppr baseline needs --budget")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        # neither changes any result
        d.pop("workers")
        d.pop("out")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def budget_for(self, graph: KnowledgeGraph) -> int | None:
        if self.budget is not None:
            return self.budget
        if self.budget_fraction is not None:
            return max(1, round(self.budget_fraction * len(graph)))
        return None


# ---------------------------------------------------------------------------
# per-user work


@dataclass
class UserResult:
    workload: Workload
    summary: WeightedSummary | None
    cost_table: SensitivityTable | None
    user_table: SensitivityTable | None
    report: UserReport
    sampling_seed: int


@dataclass
class _Context:
    graph: KnowledgeGraph
    cfg: RunConfig
    budget: int | None
    global_table: SensitivityTable | None
    weights: CoverageWeights = field(default_factory=CoverageWeights)
    ppr: PprConfig = field(default_factory=PprConfig)
    gold: dict[str, AnswerSet] = field(default_factory=dict)

    def gold_answers(self, queries: Sequence[Query]) -> dict[str, AnswerSet]:
        for q in queries:
            if q.id not in self.gold:
                self.gold[q.id] = answers(self.graph, q)
        return self.gold


def _sample(ctx: _Context, wl: Workload, table: SensitivityTable, seed: int) -> tuple[WeightedSummary, SensitivityTable]:
    cfg, graph, uid = ctx.cfg, ctx.graph, wl.profile.user_id
    method = cfg.method
    if method == "ppr":
        scores = ppr_scores(graph, wl.profile.seeds, ctx.ppr)
        return ppr_summary(graph, scores, ctx.budget, uid), table

    cost_table = ctx.global_table if method == "corekg-global" else table
    if cfg.samples is not None:
        m = cfg.samples
    elif cfg.epsilon is not None:
        m = required_sample_size(cfg.epsilon, cfg.delta, cost_table.answerable_count)
    else:
        m = None

    if method == "corekg-uniform":
        if m is None:
            summary = uniform_coreset_budget(graph, ctx.budget, seed, uid)
        else:
            summary = uniform_coreset(graph, m, seed, uid)
        return summary, table

    dist = sampling_distribution(cost_table)
    if m is None:
        summary = sample_coreset_budget(dist, cost_table, ctx.budget, seed, uid)
    else:
        summary = sample_coreset(dist, cost_table, m, seed, uid)
    if method == "corekg-unweighted":
        summary = strip_weights(summary)
    return summary, cost_table


def _summarize_user(ctx: _Context, index: int, wl: Workload) -> tuple[WeightedSummary | None, SensitivityTable | None, SensitivityTable | None, list[str], int]:
    seed = derive_seed(ctx.cfg.rng_seed, 2, index)
    flags = list(wl.flags)
    table = None
    if wl.train:
        table = compute_sensitivity(ctx.graph, wl.train, ctx.cfg.relevance, wl.profile.user_id)
    if table is None or table.answerable_count == 0:
        flags.append("no_signal")
        return None, None, table, flags, seed
    summary, cost_table = _sample(ctx, wl, table, seed)
    return summary, cost_table, table, flags, seed


def _report(ctx: _Context, wl: Workload, summary, cost_table, user_table, flags) -> UserReport:
    uid = wl.profile.user_id
    base = dict(
        user_id=uid,
        method=ctx.cfg.method,
        n_train=len(wl.train),
        n_test=len(wl.test),
        answerable_train=user_table.answerable_count if user_table is not None else 0,
        seeds=[t.value for t in wl.profile.sorted_seeds()],
        flags=flags,
    )
    if summary is None:
        return UserReport(coverage=None, precision=0.0, recall=0.0, f1=0.0, tp=0, fp=0, fn=0,
                          summary_size=0, effective_m=None, total_sensitivity=None, **base)
    sg = materialize_summary_graph(summary, ctx.graph)
    if wl.test:
        cov, (p, r, f1), (tp, fp, fn), rows = evaluate_summary(
            sg, ctx.graph, wl.test, ctx.weights, ctx.gold_answers(wl.test))
    else:
        cov, (p, r, f1), (tp, fp, fn), rows = None, (0.0, 0.0, 0.0), (0, 0, 0), []
    if cov is None and "empty_test" not in flags:
        flags.append("no_scorable_test_query")
    return UserReport(
        coverage=cov, precision=p, recall=r, f1=f1, tp=tp, fp=fp, fn=fn,
        summary_size=len(summary), effective_m=summary.m,
        total_sensitivity=cost_table.total,
        workload_cost=full_cost(cost_table),
        coreset_cost=coreset_cost(summary, cost_table),
        per_query=rows, **base,
    )


def _run_user(ctx: _Context, index: int, wl: Workload) -> UserResult:
    summary, cost_table, user_table, flags, seed = _summarize_user(ctx, index, wl)
    report = _report(ctx, wl, summary, cost_table, user_table, flags)
    return UserResult(wl, summary, cost_table, user_table, report, seed)


_WORKER_CTX: _Context | None = None


def _init_worker(ctx: _Context):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _run_user_in_worker(args):
    index, wl = args
    res = _run_user(_WORKER_CTX, index, wl)
    # tables are large and not needed by the parent
    res.cost_table = res.user_table = None
    return res


def run_users(graph: KnowledgeGraph, train: Sequence[Query], workloads: Sequence[Workload], cfg: RunConfig) -> list[UserResult]:
    """Summarize and evaluate every user; results are in user order whatever the pool size."""
    global_table = None
    if cfg.method == "corekg-global" and train:
        global_table = compute_sensitivity(graph, train, cfg.relevance)
    ctx = _Context(graph, cfg, cfg.budget_for(graph), global_table)
    workers = cfg.workers or os.cpu_count() or 1
    jobs = list(enumerate(workloads))
    if workers <= 1 or len(jobs) <= 1:
        return [_run_user(ctx, i, wl) for i, wl in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs)), initializer=_init_worker, initargs=(ctx,)) as pool:
        return list(pool.map(_run_user_in_worker, jobs))


def prepare(queries: Sequence[Query], cfg: RunConfig) -> tuple[list[Query], list[Query], list[Workload]]:
    train, test = split_workload(queries, cfg.split, derive_seed(cfg.rng_seed, 0))
    return train, test, build_workloads(train, test, cfg.users, cfg.seeds_per_user, cfg.rng_seed)


def run_in_memory(graph: KnowledgeGraph, queries: Sequence[Query], cfg: RunConfig) -> tuple[list[UserResult], AggregateReport]:
    cfg.validate()
    train, _, workloads = prepare(queries, cfg)
    results = run_users(graph, train, workloads, cfg)
    if not any(r.summary is not None for r in results):
        raise NoUsersWithSignal("no user has an answerable training query")
    return results, aggregate_users([r.report for r in results])


# ---------------------------------------------------------------------------
# on-disk pipeline


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_json(obj, fh)


@dataclass
class Inputs:
    graph: KnowledgeGraph
    workload: LoadedWorkload
    records: int


def load_inputs(cfg: RunConfig) -> Inputs:
    if not cfg.dataset or not cfg.workload:
        raise ConfigError("--dataset and --workload are required")
    prefixes = load_prefixes(cfg.prefixes)
    graph = load_ntriples(cfg.dataset)
    wl = load_workload(cfg.workload, prefixes)
    return Inputs(graph, wl, len(wl.queries) + len(wl.rejected) + wl.duplicates)


def _manifest(cfg: RunConfig, inputs: Inputs, train, test, workloads, seeds: list[int]) -> dict[str, Any]:
    files = {"dataset": cfg.dataset, "workload": cfg.workload}
    if cfg.prefixes:
        files["prefixes"] = cfg.prefixes
    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "inputs": {k: {"path": v, "sha256": _sha256(v)} for k, v in files.items()},
        "graph": {"triples": len(inputs.graph), "terms": len(inputs.graph.terms), "malformed_lines": inputs.graph.malformed},
        "workload": {
            "records": inputs.records,
            "queries": len(inputs.workload.queries),
            "rejected": len(inputs.workload.rejected),
            "duplicates": inputs.workload.duplicates,
            "train": len(train),
            "test": len(test),
        },
        "rng": {
            "global_seed": cfg.rng_seed,
            "split_seed": derive_seed(cfg.rng_seed, 0),
            "users": [
                {"user_id": wl.profile.user_id, "profile_seed": derive_seed(cfg.rng_seed, 1, i), "sampling_seed": s}
                for i, (wl, s) in enumerate(zip(workloads, seeds))
            ],
        },
    }


def prepare_workload(cfg: RunConfig) -> tuple[Inputs, list[Query], list[Query], list[Workload]]:
    """Load inputs, split and profile users, and write ``profiles.tsv``."""
    cfg.validate(sampling=False)
    inputs = load_inputs(cfg)
    train, test, workloads = prepare(inputs.workload.queries, cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "profiles.tsv", "w", encoding="utf-8", newline="\n") as fh:
        write_profiles([wl.profile for wl in workloads], fh)
    return inputs, train, test, workloads


def run_pipeline(cfg: RunConfig) -> AggregateReport:
    """Full run; writes profiles, summaries, reports, aggregate and manifest under ``cfg.out``."""
    cfg.validate()
    inputs, train, test, workloads = prepare_workload(cfg)
    out = Path(cfg.out)
    (out / "error.json").unlink(missing_ok=True)
    results = run_users(inputs.graph, train, workloads, cfg)
    for r in results:
        uid = r.workload.profile.user_id
        if r.summary is not None:
            with open(out / f"summary_{uid}.tsv", "w", encoding="utf-8", newline="\n") as fh:
                write_summary_tsv(r.summary, inputs.graph, fh)
            with open(out / f"summary_{uid}.json", "w", encoding="utf-8", newline="\n") as fh:
                write_summary_manifest(r.summary, fh, method=cfg.method, epsilon=cfg.epsilon, delta=cfg.delta,
                                       samples=cfg.samples, budget=cfg.budget_for(inputs.graph), rng_seed=r.sampling_seed)
        _write_json(out / f"report_{uid}.json", r.report.to_json())
    _write_json(out / "manifest.json", _manifest(cfg, inputs, train, test, workloads, [r.sampling_seed for r in results]))
    if not any(r.summary is not None for r in results):
        raise NoUsersWithSignal("no user has an answerable training query")
    return write_aggregate(out)


def read_config(out: str | Path) -> RunConfig:
    with open(Path(out) / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = RunConfig.from_dict(manifest["config"])
    cfg.out = str(out)
    return cfg


def evaluate_run(out: str | Path, cfg: RunConfig | None = None) -> AggregateReport:
    """Re-evaluate the summary files of a previous run and rewrite its reports."""
    out = Path(out)
    cfg = cfg or read_config(out)
    cfg.validate()
    inputs = load_inputs(cfg)
    graph = inputs.graph
    _, _, workloads = prepare(inputs.workload.queries, cfg)
    with open(out / "profiles.tsv", encoding="utf-8") as fh:
        stored = {p.user_id: p for p in read_profiles(fh)}
    global_table = None
    if cfg.method == "corekg-global":
        train, _ = split_workload(inputs.workload.queries, cfg.split, derive_seed(cfg.rng_seed, 0))
        global_table = compute_sensitivity(graph, train, cfg.relevance)
    ctx = _Context(graph, cfg, cfg.budget_for(graph), global_table)
    for wl in workloads:
        uid = wl.profile.user_id
        if uid in stored and stored[uid].seeds != wl.profile.seeds:
            raise ConfigError(f"profiles.tsv disagrees with the configuration for user {uid}")
        table = compute_sensitivity(graph, wl.train, cfg.relevance, uid) if wl.train else None
        flags = list(wl.flags)
        path = out / f"summary_{uid}.tsv"
        summary = cost_table = None
        if table is None or table.answerable_count == 0:
            flags.append("no_signal")
        elif path.exists():
            summary = load_summary(path, graph, uid)
            cost_table = global_table if cfg.method == "corekg-global" else table
        else:
            flags.append("missing_summary")
        _write_json(out / f"report_{uid}.json", _report(ctx, wl, summary, cost_table, table, flags).to_json())
    return write_aggregate(out)


def load_summary(path: str | Path, graph: KnowledgeGraph, user_id: str | None = None) -> WeightedSummary:
    with open(path, encoding="utf-8") as fh:
        rows = read_summary_tsv(fh)
    entries = {}
    for triple, weight, mult in rows:
        tid = graph.triple_id(triple)
        if tid is None:
            raise ValueError(f"{path}: triple {triple.n3()} is not in the dataset")
        entries[tid] = Entry(mult, weight)
    meta_path = Path(path).with_suffix(".json")
    meta = {}
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    m = meta.get("m", sum(e.multiplicity for e in entries.values()))
    return WeightedSummary(entries, m, meta.get("S", math.nan), user_id, meta)


def write_aggregate(out: str | Path) -> AggregateReport:
    """Aggregate ``report_*.json`` (in ``profiles.tsv`` order) into aggregate.json / .csv."""
    out = Path(out)
    with open(out / "profiles.tsv", encoding="utf-8") as fh:
        uids = [p.user_id for p in read_profiles(fh)]
    reports = []
    for uid in uids:
        path = out / f"report_{uid}.json"
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                reports.append(UserReport.from_json(json.load(fh)))
    if not any(r.evaluated for r in reports):
        raise NoUsersWithSignal("no user could be evaluated")
    agg = aggregate_users(reports)
    _write_json(out / "aggregate.json", agg.to_json())
    with open(out / "aggregate.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_csv(reports, fh)
    return agg
