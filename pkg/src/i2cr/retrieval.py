"""Top-k lexical candidate retrieval over a snapshot.

The score of a (mention, entity) pair is the best composite fuzzy ratio over
the entity name and every alias. Retrieval is a full scan with two safe
shortcuts that cannot change results: an exact-match fast path, and a
length/token upper bound that skips entities which provably cannot reach the
current k-th best score.
"""

import bisect
import threading
import weakref
from dataclasses import dataclass

from .fuzzy import base_ratio, normalize, token_set_ratio, token_sort_ratio
from .kg import EntityRecord, KgSnapshot

__all__ = ["Candidate", "CandidateSet", "lexical_score", "retrieve_topk"]


@dataclass(frozen=True)
class Candidate:
    entity_id: str
    score: int  # 0..100


@dataclass(frozen=True)
class CandidateSet:
    """Ranked candidates: score descending, ties by ascending entity id."""

    query: str
    k: int
    entries: tuple[Candidate, ...]

    def __post_init__(self):
        keys = [(-c.score, c.entity_id) for c in self.entries]
        if keys != sorted(keys):
            raise ValueError("entries must be sorted by score desc, id asc")
        if len({c.entity_id for c in self.entries}) != len(self.entries):
            raise ValueError("entries must not repeat an entity id")
        if len(self.entries) > self.k:
            raise ValueError("more entries than k")

    def ids(self) -> tuple[str, ...]:
        return tuple(c.entity_id for c in self.entries)

    def without(self, excluded: set[str]) -> tuple[Candidate, ...]:
        return tuple(c for c in self.entries if c.entity_id not in excluded)


def lexical_score(mention: str, entity: EntityRecord) -> int:
    """Best fuzzy ratio between the mention and the entity's name or aliases."""
    best = 0
    for variant in (entity.name, *entity.aliases):
        best = max(best, _variant_score(normalize(mention), normalize(variant)))
        if best == 100:
            return best
    return best


def _variant_score(m_norm: str, v_norm: str) -> int:
    # operate on pre-normalized strings; the public scorers re-normalize,
    # which is idempotent here
    if m_norm == v_norm:
        return 100
    best = base_ratio(m_norm, v_norm)
    if best < 100:
        best = max(best, token_sort_ratio(m_norm, v_norm))
    if best < 100:
        best = max(best, token_set_ratio(m_norm, v_norm))
    return best


def _upper_bound(m_norm: str, m_tokens: set[str], rec: EntityRecord) -> int:
    """Cheap bound on lexical_score; must never under-estimate.

    token_set_ratio reaches 100 when the token sets intersect or either side
    is empty (containment), so the bound is 100 in those cases; otherwise
    every scorer compares strings whose lengths equal the normalized operands,
    and distance >= length difference.
    """
    if not m_tokens:
        return 100
    bound = 0
    lm = len(m_norm)
    for variant in (rec.name, *rec.aliases):
        v_norm = normalize(variant)
        v_tokens = v_norm.split()
        if not v_tokens or not m_tokens.isdisjoint(v_tokens):
            return 100
        longest = max(lm, len(v_norm))
        bound = max(bound, int(100.0 * (1.0 - abs(lm - len(v_norm)) / longest) + 0.5))
    return bound


_topk_cache: "weakref.WeakKeyDictionary[KgSnapshot, dict]" = weakref.WeakKeyDictionary()
_cache_lock = threading.Lock()


def retrieve_topk(mention: str, kg: KgSnapshot, k: int) -> CandidateSet:
    """The k best-scoring entities for the mention.

    Deterministic: ties break by ascending entity id, so equal inputs always
    produce the identical CandidateSet. Results are memoized per snapshot.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    with _cache_lock:
        per_kg = _topk_cache.setdefault(kg, {})
        cached = per_kg.get((mention, k))
    if cached is not None:
        return cached

    m_norm = normalize(mention)
    m_tokens = set(m_norm.split())
    top: list[tuple[int, str]] = []  # (-score, id), kept sorted, length <= k
    kth = -1
    for rec in kg:
        if len(top) == k and _upper_bound(m_norm, m_tokens, rec) < kth:
            continue
        score = lexical_score(mention, rec)
        if len(top) == k:
            if (-score, rec.id) >= top[-1]:
                continue
            top.pop()
        bisect.insort(top, (-score, rec.id))
        kth = -top[-1][0]

    result = CandidateSet(
        query=mention,
        k=k,
        entries=tuple(Candidate(eid, -neg) for neg, eid in top),
    )
    with _cache_lock:
        _topk_cache.setdefault(kg, {})[(mention, k)] = result
    return result
