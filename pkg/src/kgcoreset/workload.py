"""User profiles and personalized train/test workloads."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .query import Query, extract_entities
from .store import Term

log = logging.getLogger(__name__)


def derive_seed(seed: int, *key: int) -> int:
    """Independent 63-bit seed for the stream addressed by ``key``.

    Streams of different keys never depend on each other, so adding users does
    not perturb the draws of earlier ones.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    seeds: frozenset[Term]

    def sorted_seeds(self) -> list[Term]:
        return sorted(self.seeds, key=lambda t: t.value)


@dataclass
class Workload:
    profile: UserProfile
    train: list[Query]
    test: list[Query]

    @property
    def flags(self) -> list[str]:
        out = []
        if not self.train:
            out.append("empty_train")
        if not self.test:
            out.append("empty_test")
        return out


def split_workload(queries: Sequence[Query], ratio: float = 0.8, rng_seed: int = 0) -> tuple[list[Query], list[Query]]:
    """Shuffle deterministically and cut at ``ceil(ratio * n)``."""
    if not 0 < ratio < 1:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if len(queries) < 2:
        raise ValueError("need at least 2 queries to split")
    ids = [q.id for q in queries]
    if len(set(ids)) != len(ids):
        raise ValueError("queries must be deduplicated by id before splitting")
    perm = np.random.default_rng(rng_seed).permutation(len(queries))
    cut = math.ceil(ratio * len(queries) - 1e-12)
    shuffled = [queries[i] for i in perm]
    return shuffled[:cut], shuffled[cut:]


def entity_pool(queries: Iterable[Query]) -> list[Term]:
    pool = set()
    for q in queries:
        pool |= extract_entities(q)
    return sorted(pool, key=lambda t: t.value)


def build_user_profile(train: Sequence[Query], k: int = 5, rng_seed: int = 0, user_id: str = "u0") -> UserProfile:
    """Draw ``k`` distinct seeds uniformly from the entities of ``train``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = entity_pool(train)
    if not pool:
        raise ValueError("no IRI entities in the training queries")
    if len(pool) < k:
        log.warning("entity pool has %d entities < k=%d; using the whole pool", len(pool), k)
        return UserProfile(user_id, frozenset(pool))
    picks = np.random.default_rng(rng_seed).choice(len(pool), size=k, replace=False)
    return UserProfile(user_id, frozenset(pool[i] for i in sorted(picks)))


def personalize(queries: Sequence[Query], profile: UserProfile) -> list[Query]:
    """Queries mentioning at least one seed, in their original order."""
    out = [q for q in queries if extract_entities(q) & profile.seeds]
    if not out:
        log.warning("user %s: no query mentions any seed", profile.user_id)
    return out


def build_workloads(train: Sequence[Query], test: Sequence[Query], users: int, k: int, rng_seed: int) -> list[Workload]:
    """Profiles drawn from ``train``; both splits personalized per profile."""
    out = []
    width = max(2, len(str(users - 1)))
    for i in range(users):
        uid = f"u{i:0{width}d}"
        profile = build_user_profile(train, k, derive_seed(rng_seed, 1, i), uid)
        out.append(Workload(profile, personalize(train, profile), personalize(test, profile)))
    return out


# manifest: user_id<TAB>seed1,seed2,...

def write_profiles(profiles: Iterable[UserProfile], out: IO[str]) -> None:
    for p in profiles:
        out.write(f"{p.user_id}\t{','.join(t.value for t in p.sorted_seeds())}\n")


def read_profiles(stream: IO[str] | Iterable[str]) -> list[UserProfile]:
    out = []
    for line in stream:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        uid, _, seeds = line.partition("\t")
        out.append(UserProfile(uid, frozenset(Term.iri(s) for s in seeds.split(",") if s)))
    return out
