"""The linking engine.

One sample flows through rounds. Round 1 sees only the mention and its text
context; each later round adds exactly one visual clue. Within a round the
selector picks a candidate, a text-consistency gate (threshold alpha) may
reject it and force reselection up to a retry limit, and an image-alignment
gate (threshold beta) decides whether the pick is final. When the alignment
gate fails and clue kinds remain, the next clue is extracted, the candidate
pool is restored, and a new round starts. When every kind is spent without an
alignment pass, the round pick with the highest alignment score wins (later
round on ties). A nil selection ends its round; if no round ever produced an
entity the prediction is nil.

Both gates are strict: a score equal to its threshold fails.

All state lives in locals, so any number of samples may be linked
concurrently against shared snapshots and backend handles.
"""

import math
import time
from dataclasses import dataclass
from typing import Sequence

from .backends.base import Backends, SelectorRequest, VisualClue
from .config import PipelineConfig
from .errors import BackendFailure, DegenerateEmbedding, DimensionMismatch, UnparseableResponse
from .kg import EntityRecord, KgSnapshot
from .retrieval import Candidate, retrieve_topk
from .trace import (
    FALLBACK_IAV_EXHAUSTED,
    FALLBACK_ICR_LIMIT,
    FALLBACK_UNPARSEABLE,
    FallbackEvent,
    IavEvent,
    IcrEvent,
    LinkTrace,
    RetrievalEvent,
    TesEvent,
    VifEvent,
)

__all__ = [
    "MentionSample",
    "LinkResult",
    "build_mention_context",
    "build_entity_context",
    "cosine",
    "icr_score",
    "iav_score",
    "run_tes",
    "TesOutcome",
    "link",
    "link_topk",
]


@dataclass(frozen=True)
class MentionSample:
    """One linking task: a mention, its text context, optionally an image."""

    mention: str
    context: str = ""
    image: bytes | None = None
    gold_id: str | None = None
    out_of_kg: bool = False

    def __post_init__(self):
        if not self.mention:
            raise ValueError("mention must be non-empty")
        if self.gold_id is not None and self.out_of_kg:
            raise ValueError("a sample cannot both carry a gold_id and be out_of_kg")


@dataclass(frozen=True)
class LinkResult:
    prediction: str | None  # entity id, None for nil
    topk: tuple[str | None, ...] | None
    trace: LinkTrace
    wall_time: float


def render_clue(clue: VisualClue) -> str:
    return f"{clue.kind.upper()}: {clue.text}"


def build_mention_context(sample: MentionSample, clues: Sequence[VisualClue], round_index: int = 1) -> str:
    """Mention, context, then one line per clue in acquisition order.

    Segments join with single newlines; empty segments drop out. In the
    standard flow the clue list is empty exactly in round 1.
    """
    if round_index < 1:
        raise ValueError("round_index starts at 1")
    segments = [sample.mention, sample.context, *(render_clue(c) for c in clues)]
    return "\n".join(s for s in segments if s)


def build_entity_context(entity: EntityRecord) -> str:
    """Entity name joined with its description; name alone when empty."""
    return "\n".join(s for s in (entity.name, entity.description) if s)


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise DimensionMismatch(f"cannot compare vectors of length {len(u)} and {len(v)}")
    norm_u = math.sqrt(math.fsum(x * x for x in u))
    norm_v = math.sqrt(math.fsum(x * x for x in v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise DegenerateEmbedding("zero-norm embedding")
    return math.fsum(x * y for x, y in zip(u, v)) / (norm_u * norm_v)


def icr_score(mention_context: str, entity_context: str, embedder) -> float:
    """Cosine similarity of the two text embeddings, in [-1, 1]."""
    return cosine(embedder.embed(mention_context), embedder.embed(entity_context))


def iav_score(entity: EntityRecord, image: bytes, scorer) -> float:
    """Cross-modal alignment of the entity description against the image."""
    return scorer.cross_modal_score(entity.description, image)


@dataclass(frozen=True)
class TesOutcome:
    entity: EntityRecord | None  # None means nil
    raw_text: str
    unparseable_fallback: bool = False


def run_tes(
    sample: MentionSample,
    candidates: Sequence[Candidate],
    clues: Sequence[VisualClue],
    selector,
    kg: KgSnapshot,
    config: PipelineConfig,
) -> TesOutcome:
    """One selector call over the current candidate list.

    An empty list short-circuits to nil without touching the backend. If the
    selector's answer stays unparseable after the adapter's own retries, the
    top-ranked candidate is used so one bad generation cannot sink a run.
    """
    if not candidates:
        return TesOutcome(entity=None, raw_text="")
    records = [kg[c.entity_id] for c in candidates]
    request = SelectorRequest(
        instruction=config.instruction_template,
        mention=sample.mention,
        context=sample.context,
        visual_clues=tuple(clues),
        candidates=tuple((r.name, r.description) for r in records),
        temperature=config.temperature,
    )
    try:
        response = selector.select_entity(request)
    except UnparseableResponse as exc:
        return TesOutcome(entity=records[0], raw_text=exc.raw_text, unparseable_fallback=True)
    if response.choice is None:
        return TesOutcome(entity=None, raw_text=response.raw_text)
    for record in records:  # duplicate names resolve to the best-ranked record
        if record.name == response.choice:
            return TesOutcome(entity=record, raw_text=response.raw_text)
    raise AssertionError("selector choice not among candidate names")


class _Observation:
    """Best gate scores seen for one never-accepted candidate."""

    __slots__ = ("entity_id", "lexical_rank", "best_icr", "best_iav", "best_iav_round")

    def __init__(self, entity_id: str, lexical_rank: int):
        self.entity_id = entity_id
        self.lexical_rank = lexical_rank
        self.best_icr: float | None = None
        self.best_iav: float | None = None
        self.best_iav_round = 0

    def note_icr(self, score: float) -> None:
        if self.best_icr is None or score > self.best_icr:
            self.best_icr = score

    def note_iav(self, score: float, round_index: int) -> None:
        if self.best_iav is None or (score, round_index) > (self.best_iav, self.best_iav_round):
            self.best_iav = score
            self.best_iav_round = round_index


def link(sample: MentionSample, kg: KgSnapshot, backends: Backends, config: PipelineConfig) -> LinkResult:
    """Link one sample to its best entity (or nil)."""
    return _run(sample, kg, backends, config, collect_k=None)


def link_topk(
    sample: MentionSample,
    kg: KgSnapshot,
    backends: Backends,
    config: PipelineConfig,
    k: int,
) -> LinkResult:
    """Link one sample and also produce a ranked list of up to k entity ids.

    The machine keeps running past its first accepted entity, permanently
    setting each accepted one aside, until k entities are accepted or
    candidates and rounds run out. Entities that only ever failed a gate rank
    after the accepted ones: alignment-scored ones first (score descending,
    later round on ties), then consistency-only ones (score descending), then
    untouched lexical candidates in retrieval order. A nil prediction yields
    the nil singleton list.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return _run(sample, kg, backends, config, collect_k=k)


def _run(
    sample: MentionSample,
    kg: KgSnapshot,
    backends: Backends,
    config: PipelineConfig,
    collect_k: int | None,
) -> LinkResult:
    started = time.perf_counter()
    events: list = []
    try:
        accepted, observed, fallback_winner, pool = _drive(sample, kg, backends, config, collect_k, events)
    except BackendFailure as exc:
        exc.partial_trace = LinkTrace(events=tuple(events))
        raise

    prediction: str | None
    if accepted:
        prediction = accepted[0]
    else:
        prediction = fallback_winner  # None when every round came up nil

    topk: tuple[str | None, ...] | None = None
    if collect_k is not None:
        if prediction is None:
            topk = (None,)
        else:
            ranked = list(accepted)
            ranked_set = set(ranked)
            failers = [o for o in observed.values() if o.entity_id not in ranked_set]
            iav_cohort = sorted(
                (o for o in failers if o.best_iav is not None),
                key=lambda o: (-o.best_iav, -o.best_iav_round, o.lexical_rank, o.entity_id),
            )
            icr_cohort = sorted(
                (o for o in failers if o.best_iav is None),
                key=lambda o: (-(o.best_icr if o.best_icr is not None else -math.inf), o.lexical_rank, o.entity_id),
            )
            ranked.extend(o.entity_id for o in iav_cohort)
            ranked.extend(o.entity_id for o in icr_cohort)
            seen = set(ranked)
            for candidate in pool:
                if len(ranked) >= collect_k:
                    break
                if candidate.entity_id not in seen:
                    ranked.append(candidate.entity_id)
            topk = tuple(ranked[:collect_k])

    return LinkResult(
        prediction=prediction,
        topk=topk,
        trace=LinkTrace(events=tuple(events)),
        wall_time=time.perf_counter() - started,
    )


def _drive(sample, kg, backends, config, collect_k, events):
    """Run the round machine, appending trace events; returns the bookkeeping."""
    pool = retrieve_topk(sample.mention, kg, config.k)
    events.append(
        RetrievalEvent(
            query=sample.mention,
            k=config.k,
            entries=tuple((c.entity_id, c.score) for c in pool.entries),
        )
    )
    rank_of = {c.entity_id: i for i, c in enumerate(pool.entries)}

    want = 1 if collect_k is None else collect_k
    clue_rounds = sample.image is not None and config.enable_vif and bool(config.enabled_clue_kinds)
    all_at_once = config.all_clues_first_round and clue_rounds
    iav_active = config.enable_iav and sample.image is not None
    max_rounds = 1 if (not clue_rounds or all_at_once) else config.max_rounds

    clues: list[VisualClue] = []
    if all_at_once:
        for kind in config.clue_order:
            clue = backends.extractor.extract_visual_clue(sample.image, kind)
            events.append(VifEvent(round_index=1, kind=kind, text=clue.text))
            clues.append(clue)

    accepted: list[str] = []
    observed: dict[str, _Observation] = {}
    per_round_best: list[tuple[float, int, str]] = []  # (iav score, round, entity id)
    fallback_winner: str | None = None

    def observation(entity_id: str) -> _Observation:
        if entity_id not in observed:
            observed[entity_id] = _Observation(entity_id, rank_of[entity_id])
        return observed[entity_id]

    round_index = 1
    done = False
    while not done:
        remaining = list(pool.without(set(accepted)))
        selectable = bool(remaining)
        icr_failures = 0
        while True:  # selection cycles within this round
            outcome = run_tes(sample, remaining, clues, backends.selector, kg, config)
            chosen = outcome.entity
            events.append(
                TesEvent(round_index=round_index, chosen=chosen.id if chosen else None, raw=outcome.raw_text)
            )
            if outcome.unparseable_fallback:
                events.append(
                    FallbackEvent(round_index=round_index, rule=FALLBACK_UNPARSEABLE, detail=chosen.id)
                )
            if chosen is None:
                break  # nil ends this round's selection

            if config.enable_icr:
                score = icr_score(
                    build_mention_context(sample, clues, round_index),
                    build_entity_context(chosen),
                    backends.embedder,
                )
                passed = score > config.alpha
                events.append(
                    IcrEvent(
                        round_index=round_index,
                        entity_id=chosen.id,
                        score=score,
                        threshold=config.alpha,
                        passed=passed,
                    )
                )
                if not passed:
                    observation(chosen.id).note_icr(score)
                    icr_failures += 1
                    if icr_failures < config.icr_retry_limit:
                        remaining = [c for c in remaining if c.entity_id != chosen.id]
                        continue
                    # retry budget spent: keep the last selection and move on
                    events.append(
                        FallbackEvent(round_index=round_index, rule=FALLBACK_ICR_LIMIT, detail=chosen.id)
                    )

            if iav_active:
                score = iav_score(chosen, sample.image, backends.xmodal)
                passed = score > config.beta
                events.append(
                    IavEvent(
                        round_index=round_index,
                        entity_id=chosen.id,
                        score=score,
                        threshold=config.beta,
                        passed=passed,
                    )
                )
                if not passed:
                    observation(chosen.id).note_iav(score, round_index)
                    per_round_best.append((score, round_index, chosen.id))
                    break
            # accepted (alignment passed, or the gate is vacuous)
            accepted.append(chosen.id)
            if len(accepted) >= want:
                done = True
                break
            remaining = [c for c in remaining if c.entity_id != chosen.id]
            icr_failures = 0

        if done:
            break
        # the round ended on nil or a failed alignment gate; a fresh clue can
        # only help while un-accepted candidates exist to reselect from
        if selectable and clue_rounds and not all_at_once and round_index < max_rounds:
            kind = config.clue_order[round_index - 1]
            clue = backends.extractor.extract_visual_clue(sample.image, kind)
            events.append(VifEvent(round_index=round_index, kind=kind, text=clue.text))
            clues.append(clue)
            round_index += 1
            continue
        # rounds exhausted
        if not accepted and per_round_best:
            best_score, best_round, winner = max(per_round_best)
            events.append(
                FallbackEvent(round_index=round_index, rule=FALLBACK_IAV_EXHAUSTED, detail=winner)
            )
            fallback_winner = winner
        break

    return accepted, observed, fallback_winner, pool.entries
