"""Personalized, weighted coreset summaries of RDF knowledge graphs driven by SPARQL workloads."""

from .baselines import PprConfig, ppr_scores, ppr_summary, strip_weights, uniform_coreset, uniform_coreset_budget
from .coreset import (
    SamplingConfig,
    WeightedSummary,
    coreset_cost,
    materialize_summary_graph,
    required_sample_size,
    sample_coreset,
    sample_coreset_budget,
)
from .engine import answers, evaluate_bgp, relevant_triples
from .metrics import CoverageWeights, answer_f1, coverage, evaluate_summary
from .query import Query, TriplePattern, Variable, load_query, normalize, parse_query
from .sensitivity import SensitivityTable, compute_sensitivity, full_cost, sampling_distribution
from .store import KnowledgeGraph, Term, Triple, load_ntriples, lookup_pattern, parse_ntriples
from .workload import UserProfile, Workload, build_user_profile, personalize, split_workload

__version__ = "0.1.0"
