"""Scenario machinery for the linking state machine tests.

Each scenario scripts a mock transcript by hand, runs the engine, and carries
the expectations (prediction, summarized event sequence) that were derived
from the documented machine rules, not from running the code.
"""

import math
from dataclasses import dataclass, field

from i2cr.backends import Backends, MockBackend, SelectorRequest
from i2cr.config import PipelineConfig
from i2cr.kg import EntityRecord, KgSnapshot
from i2cr.pipeline import LinkResult, MentionSample, link, link_topk
from i2cr.retrieval import retrieve_topk
from i2cr.trace import (
    FallbackEvent,
    IavEvent,
    IcrEvent,
    LinkTrace,
    RetrievalEvent,
    TesEvent,
    VifEvent,
)

IMG = b"scenario-image-bytes"

U_PLAIN = (1.0, 0.0)  # mention-context embedding used unless a scenario says otherwise


def unit_for(score: float) -> tuple[float, float]:
    """Entity-context vector whose cosine against U_PLAIN is ~score."""
    return (score, math.sqrt(max(0.0, 1.0 - score * score)))


def ladder_kg(n: int = 5) -> KgSnapshot:
    """e1..eN all score 100 for mention 'query', so ranks follow ids."""
    suffix = ["", " b", " bc", " bcd", " bcde", " bcdef", " bcdefg"]
    return KgSnapshot(
        EntityRecord(id=f"e{i}", name=f"query{suffix[i - 1]}", description=f"about entity {i}")
        for i in range(1, n + 1)
    )


def pool_records(kg, sample, config, exclude=()) -> list[EntityRecord]:
    pool = retrieve_topk(sample.mention, kg, config.k)
    return [kg[c.entity_id] for c in pool.entries if c.entity_id not in exclude]


def sel_req(config, sample, records, clues=()) -> SelectorRequest:
    return SelectorRequest(
        instruction=config.instruction_template,
        mention=sample.mention,
        context=sample.context,
        visual_clues=tuple(clues),
        candidates=tuple((r.name, r.description) for r in records),
        temperature=config.temperature,
    )


def summarize_trace(trace: LinkTrace) -> list[tuple]:
    out = []
    for event in trace.events:
        if isinstance(event, RetrievalEvent):
            out.append(("retrieval", len(event.entries)))
        elif isinstance(event, TesEvent):
            out.append(("tes", event.round_index, event.chosen))
        elif isinstance(event, IcrEvent):
            out.append(("icr", event.round_index, event.entity_id, event.passed))
        elif isinstance(event, IavEvent):
            out.append(("iav", event.round_index, event.entity_id, event.passed))
        elif isinstance(event, VifEvent):
            out.append(("vif", event.round_index, event.kind))
        elif isinstance(event, FallbackEvent):
            out.append(("fallback", event.round_index, event.rule))
    return out


@dataclass
class Scenario:
    name: str
    sample: MentionSample
    kg: KgSnapshot
    config: PipelineConfig
    mock: MockBackend = field(default_factory=MockBackend)
    collect_k: int | None = None
    expected_prediction: str | None = None
    expected_events: list[tuple] | None = None
    expected_topk: tuple | None = None

    @property
    def backends(self) -> Backends:
        return Backends.single(self.mock)

    def run(self) -> LinkResult:
        if self.collect_k is None:
            return link(self.sample, self.kg, self.backends, self.config)
        return link_topk(self.sample, self.kg, self.backends, self.config, self.collect_k)

    # --- scripting shorthand -------------------------------------------------

    def tes(self, records, clues, answer) -> None:
        self.mock.script_select(sel_req(self.config, self.sample, records, clues), answer)

    def icr(self, mention_context: str, entity: EntityRecord, vector) -> None:
        self.mock.script_embed(mention_context, U_PLAIN)
        self.mock.script_embed(f"{entity.name}\n{entity.description}", vector)

    def iav(self, entity: EntityRecord, score: float) -> None:
        self.mock.script_xmodal(entity.description, self.sample.image, score)

    def clue(self, kind: str, text: str) -> None:
        self.mock.script_clue(self.sample.image, kind, text)


def mention_context(sample: MentionSample, clues=()) -> str:
    parts = [sample.mention, sample.context]
    parts.extend(f"{c.kind.upper()}: {c.text}" for c in clues)
    return "\n".join(p for p in parts if p)
