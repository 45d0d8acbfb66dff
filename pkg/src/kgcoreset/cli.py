"""Command-line entry point.

Config files hold ``key = value`` lines using the flag names (``rng-seed`` or
``rng_seed``); ``#`` starts a comment. Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

from . import pipeline
from .metrics import dump_json
from .pipeline import ConfigError, NoUsersWithSignal, RunConfig
from .store import load_ntriples, open_text, parse_ntriples, serialize_ntriples
from .synthetic import generate_synthetic, write_prefix_file

_INT_KEYS = {"users", "seeds_per_user", "samples", "rng_seed", "workers"}
_FLOAT_KEYS = {"split", "epsilon", "delta"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def parse_budget(text: str) -> tuple[int | None, float | None]:
    """``"250"`` is a triple count, ``"5%"`` a fraction of the graph."""
    text = text.strip()
    try:
        if text.endswith("%"):
            return None, float(text[:-1]) / 100
        return int(text), None
    except ValueError:
        raise ConfigError(f"bad budget {text!r}; expected an integer or a percentage") from None


def read_config_file(path: str | Path) -> dict[str, Any]:
    known = {f.name for f in fields(RunConfig)}
    out: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key == "budget":
                out["budget"], out["budget_fraction"] = parse_budget(value)
                continue
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = int(value) if key in _INT_KEYS else float(value) if key in _FLOAT_KEYS else value
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--dataset")
    p.add_argument("--workload")
    p.add_argument("--prefixes")
    p.add_argument("--users", type=int)
    p.add_argument("--seeds-per-user", type=int)
    p.add_argument("--split", type=float)
    p.add_argument("--method", choices=pipeline.METHODS)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--samples", type=int, help="number of draws m")
    p.add_argument("--budget", help="distinct-triple budget: a count, or a percentage such as 5%%")
    p.add_argument("--relevance", choices=("join", "pattern"))
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, help="worker processes (default: logical cores)")


_SAMPLING_KEYS = ("samples", "epsilon", "delta", "budget", "budget_fraction")


def build_config(args: argparse.Namespace, sampling: bool = True) -> RunConfig:
    values: dict[str, Any] = read_config_file(args.config) if args.config else {}
    cli: dict[str, Any] = {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name != "budget":
            cli[f.name] = v
    if getattr(args, "budget", None) is not None:
        cli["budget"], cli["budget_fraction"] = parse_budget(args.budget)
    if any(k in cli for k in _SAMPLING_KEYS):
        # a sampling mode on the command line replaces the file's
        for k in _SAMPLING_KEYS:
            values.pop(k, None)
    values.update(cli)
    return RunConfig(**values).validate(sampling)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgcoreset", description="Personalized weighted coreset summaries of RDF graphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse an N-Triples file and print graph statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strict", action="store_true", help="fail on the first malformed line")
    p.add_argument("--out", help="write the deduplicated graph here")

    p = sub.add_parser("gen-synthetic", help="write a synthetic dataset, workload and prefix file")
    p.add_argument("--entities", type=int, default=300)
    p.add_argument("--relations", type=int, default=1000)
    p.add_argument("--triples", type=int, default=5000)
    p.add_argument("--queries", type=int, default=4000)
    p.add_argument("--skew", type=float, default=1.0, help="Zipf exponent of entity popularity")
    p.add_argument("--relation-skew", type=float, default=0.0, help="Zipf exponent of relation popularity")
    p.add_argument("--facet-skew", type=float, default=2.0, help="Zipf exponent of which facts of an entity get queried")
    p.add_argument("--dead-fraction", type=float, default=0.05)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    for verb, text in (("prepare-workload", "split the workload and write user profiles"),
                       ("summarize", "build, store and evaluate a summary per user")):
        _run_args(sub.add_parser(verb, help=text))

    p = sub.add_parser("evaluate", help="re-evaluate the summaries stored in a run directory")
    p.add_argument("--out", required=True)
    p = sub.add_parser("report", help="aggregate per-user reports of a run directory")
    p.add_argument("--out", required=True)
    return parser


def _ingest(args) -> int:
    if args.strict:
        with open_text(args.dataset) as fh:
            graph = parse_ntriples(fh, strict=True)
    else:
        graph = load_ntriples(args.dataset)
    stats = {"triples": len(graph), "terms": len(graph.terms), "nodes": len(graph.node_terms()),
             "predicates": len(graph.predicate_terms()), "malformed_lines": graph.malformed}
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            serialize_ntriples((graph.triple(t) for t in range(len(graph))), fh)
    dump_json(stats, sys.stdout)
    return 0


def _gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = generate_synthetic(args.entities, args.relations, args.triples, args.queries, args.skew,
                              args.rng_seed, out / "dataset.nt", out / "workload.txt", args.dead_fraction,
                              args.relation_skew, args.facet_skew)
    write_prefix_file(out / "prefixes.txt")
    dump_json({"triples": len(data.triples), "queries": len(data.queries),
               "answerable_by_construction": data.answerable_by_construction}, sys.stdout)
    return 0


def _print_aggregate(agg) -> None:
    print(f"method={agg.method} users={agg.evaluated_users}/{agg.users} "
          f"coverage={agg.coverage:.4f} precision={agg.precision:.4f} recall={agg.recall:.4f} f1={agg.f1:.4f}")
    if agg.flagged:
        print(f"flagged users: {', '.join(agg.flagged)}")


def _write_error(out: str | None, code: int, exc: BaseException) -> None:
    record = {"status": code, "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            with open(Path(out) / "error.json", "w", encoding="utf-8", newline="\n") as fh:
                dump_json(record, fh)
        except OSError:
            pass


def _out_from_argv(argv: Sequence[str]) -> str | None:
    """Best-effort ``--out`` lookup so argument errors still land in error.json."""
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return None


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = _out_from_argv(argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        out = getattr(args, "out", None)
        if args.verb == "ingest":
            return _ingest(args)
        if args.verb == "gen-synthetic":
            return _gen(args)
        if args.verb == "prepare-workload":
            cfg = build_config(args, sampling=False)
            out = cfg.out
            _, train, test, workloads = pipeline.prepare_workload(cfg)
            print(f"train={len(train)} test={len(test)} users={len(workloads)} -> {cfg.out}/profiles.tsv")
            return 0
        if args.verb == "summarize":
            cfg = build_config(args)
            out = cfg.out
            _print_aggregate(pipeline.run_pipeline(cfg))
            return 0
        if args.verb == "evaluate":
            _print_aggregate(pipeline.evaluate_run(args.out))
            return 0
        if args.verb == "report":
            _print_aggregate(pipeline.write_aggregate(args.out))
            return 0
        raise ConfigError(f"unknown verb {args.verb}")
    except ConfigError as exc:
        _write_error(out, pipeline.EXIT_CONFIG, exc)
        return pipeline.EXIT_CONFIG
    except NoUsersWithSignal as exc:
        _write_error(out, pipeline.EXIT_NO_SIGNAL, exc)
        return pipeline.EXIT_NO_SIGNAL
    except (OSError, ValueError) as exc:
        _write_error(out, pipeline.EXIT_IO, exc)
        return pipeline.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
