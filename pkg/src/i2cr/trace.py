"""Structured event log of one linking run, plus its grammar validator.

Every stage decision lands in the trace: the retrieval pool, each selector
call, every gate comparison with both operands, each extracted clue, and any
fallback rule applied. The validator walks the event sequence against the
state machine the engine implements, so a corrupted or interleaved trace is
detected rather than trusted.
"""

from dataclasses import dataclass
from typing import Union

from .config import PipelineConfig
from .errors import TraceInvalid

FALLBACK_UNPARSEABLE = "unparseable"
FALLBACK_ICR_LIMIT = "icr_limit"
FALLBACK_IAV_EXHAUSTED = "iav_exhausted"


@dataclass(frozen=True)
class RetrievalEvent:
    query: str
    k: int
    entries: tuple[tuple[str, int], ...]  # (entity id, lexical score)


@dataclass(frozen=True)
class TesEvent:
    round_index: int
    chosen: str | None  # entity id, None for nil
    raw: str


@dataclass(frozen=True)
class IcrEvent:
    round_index: int
    entity_id: str
    score: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class IavEvent:
    round_index: int
    entity_id: str
    score: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class VifEvent:
    round_index: int
    kind: str
    text: str


@dataclass(frozen=True)
class FallbackEvent:
    round_index: int
    rule: str
    detail: str = ""


TraceEvent = Union[RetrievalEvent, TesEvent, IcrEvent, IavEvent, VifEvent, FallbackEvent]

_EVENT_NAMES = {
    RetrievalEvent: "retrieval",
    TesEvent: "tes",
    IcrEvent: "icr",
    IavEvent: "iav",
    VifEvent: "vif",
    FallbackEvent: "fallback",
}


@dataclass(frozen=True)
class LinkTrace:
    events: tuple[TraceEvent, ...]

    def to_jsonable(self) -> list[dict]:
        out = []
        for event in self.events:
            obj = {"event": _EVENT_NAMES[type(event)]}
            obj.update(event.__dict__)
            if isinstance(event, RetrievalEvent):
                obj["entries"] = [list(pair) for pair in event.entries]
            out.append(obj)
        return out

    @classmethod
    def from_jsonable(cls, data: list[dict]) -> "LinkTrace":
        builders = {
            "retrieval": lambda o: RetrievalEvent(
                query=o["query"], k=o["k"], entries=tuple((e, int(s)) for e, s in o["entries"])
            ),
            "tes": lambda o: TesEvent(o["round_index"], o["chosen"], o["raw"]),
            "icr": lambda o: IcrEvent(o["round_index"], o["entity_id"], o["score"], o["threshold"], o["passed"]),
            "iav": lambda o: IavEvent(o["round_index"], o["entity_id"], o["score"], o["threshold"], o["passed"]),
            "vif": lambda o: VifEvent(o["round_index"], o["kind"], o["text"]),
            "fallback": lambda o: FallbackEvent(o["round_index"], o["rule"], o.get("detail", "")),
        }
        events = []
        for obj in data:
            try:
                events.append(builders[obj["event"]](obj))
            except (KeyError, TypeError) as exc:
                raise TraceInvalid(f"cannot rebuild trace event from {obj!r}") from exc
        return cls(events=tuple(events))


def replay_prediction(trace: LinkTrace) -> str | None:
    """Re-derive a single-entity run's prediction from its terminal event.

    Valid single-collection traces end on the event that fixed the outcome:
    a passed alignment check, a vacuously accepted selection, a fallback, or
    a terminal nil selection.
    """
    if not trace.events:
        raise TraceInvalid("empty trace")
    last = trace.events[-1]
    if isinstance(last, IavEvent) and last.passed:
        return last.entity_id
    if isinstance(last, TesEvent):
        return last.chosen
    if isinstance(last, IcrEvent) and last.passed:
        return last.entity_id
    if isinstance(last, FallbackEvent):
        if last.rule in (FALLBACK_ICR_LIMIT, FALLBACK_IAV_EXHAUSTED):
            return last.detail
        if last.rule == FALLBACK_UNPARSEABLE and len(trace.events) >= 2:
            previous = trace.events[-2]
            if isinstance(previous, TesEvent):
                return previous.chosen
    raise TraceInvalid(f"trace does not end on a deciding event: {last}")


def validate_trace(
    trace: LinkTrace,
    config: PipelineConfig,
    has_image: bool,
    collect_k: int = 1,
) -> None:
    """Raise TraceInvalid unless the event sequence fits the engine grammar."""
    events = trace.events
    if not events:
        raise TraceInvalid("empty trace")
    if not isinstance(events[0], RetrievalEvent):
        raise TraceInvalid("first event must be retrieval", 0)
    if any(isinstance(e, RetrievalEvent) for e in events[1:]):
        raise TraceInvalid("retrieval recorded more than once")

    clue_rounds = has_image and config.enable_vif and bool(config.enabled_clue_kinds)
    all_at_once = config.all_clues_first_round and clue_rounds
    max_rounds = 1 if (not clue_rounds or all_at_once) else config.max_rounds
    iav_active = config.enable_iav and has_image
    limit = config.icr_retry_limit

    index = 1
    total = len(events)
    round_index = 1
    kinds_used: list[str] = []
    any_iav_failure = False
    accepted_total = 0

    def fail(reason: str, at: int) -> None:
        raise TraceInvalid(reason, at)

    # optional up-front extraction burst: every enabled kind, in order
    if all_at_once:
        for kind in config.clue_order:
            if index >= total or not isinstance(events[index], VifEvent):
                fail("expected an up-front vif event for every enabled clue kind", index)
            event = events[index]
            if event.round_index != 1 or event.kind != kind:
                fail(f"up-front clue extraction out of order: {event}", index)
            index += 1

    if index >= total:
        raise TraceInvalid("trace has no selection events")

    # walk rounds
    while index < total:
        event = events[index]
        if not isinstance(event, TesEvent) or event.round_index != round_index:
            fail(f"expected tes for round {round_index}", index)

        # one round: selection cycles, then gate/advance
        tes_in_round = 0
        icr_fails = 0
        while index < total:
            tes = events[index]
            if not isinstance(tes, TesEvent):
                fail("selection cycle must start with tes", index)
            if tes.round_index != round_index:
                fail(f"tes round {tes.round_index} inside round {round_index}", index)
            tes_in_round += 1
            if config.enable_icr and tes_in_round > limit * max(1, collect_k):
                fail(f"more than {limit} selections in round {round_index}", index)
            index += 1

            if index < total and isinstance(events[index], FallbackEvent) \
                    and events[index].rule == FALLBACK_UNPARSEABLE:
                if events[index].round_index != round_index:
                    fail("unparseable fallback outside its round", index)
                if tes.chosen is None:
                    fail("unparseable fallback after a nil selection", index)
                index += 1

            if tes.chosen is None:
                # nil ends the round's selection
                can_advance = clue_rounds and not all_at_once and round_index < max_rounds
                if index >= total:
                    return  # terminal nil (prediction nil or max-score fallback happens below)
                nxt = events[index]
                if isinstance(nxt, VifEvent):
                    if not can_advance:
                        fail("clue extraction with no round available", index)
                    break  # round ends; vif handled below
                if isinstance(nxt, FallbackEvent) and nxt.rule == FALLBACK_IAV_EXHAUSTED:
                    break
                fail("nil selection must end the round", index)

            # icr gate for this selection
            if config.enable_icr:
                if index >= total:
                    fail("trace ends before the icr check of a selection", index - 1)
                icr = events[index]
                if not isinstance(icr, IcrEvent):
                    fail("expected icr after a non-nil selection", index)
                if icr.round_index != round_index or icr.entity_id != tes.chosen:
                    fail("icr event does not match its selection", index)
                if icr.threshold != config.alpha or icr.passed != (icr.score > icr.threshold):
                    fail("icr comparison recorded inconsistently", index)
                index += 1
                if not icr.passed:
                    icr_fails += 1
                    if icr_fails > limit:
                        fail(f"more than {limit} icr failures in round {round_index}", index - 1)
                    if icr_fails == limit:
                        if index < total and isinstance(events[index], FallbackEvent) \
                                and events[index].rule == FALLBACK_ICR_LIMIT:
                            index += 1
                        else:
                            fail("icr retry limit reached without an icr_limit fallback", index - 1)
                    else:
                        continue  # reselect: next tes in same round

            # gate: iav or vacuous acceptance
            if iav_active:
                if index >= total:
                    fail("trace ends before the iav check of an approved selection", index - 1)
                iav = events[index]
                if not isinstance(iav, IavEvent):
                    fail("expected iav for the approved selection", index)
                if iav.round_index != round_index or iav.entity_id != tes.chosen:
                    fail("iav event does not match its selection", index)
                if iav.threshold != config.beta or iav.passed != (iav.score > iav.threshold):
                    fail("iav comparison recorded inconsistently", index)
                index += 1
                if iav.passed:
                    accepted_total += 1
                    if accepted_total > collect_k:
                        fail("more acceptances than requested", index - 1)
                    if index >= total:
                        return
                    if collect_k <= 1:
                        fail("events continue after an accepted entity", index)
                    icr_fails = 0
                    continue  # top-k collection: reselect in the same round
                any_iav_failure = True
                break  # iav failed: advance or exhausted, handled below
            else:
                accepted_total += 1
                if accepted_total > collect_k:
                    fail("more acceptances than requested", index - 1)
                if index >= total:
                    return
                if collect_k <= 1:
                    fail("events continue after an accepted entity", index)
                icr_fails = 0
                continue

        # round ended without acceptance: vif advance or terminal fallback
        if index >= total:
            return
        nxt = events[index]
        if isinstance(nxt, VifEvent):
            if not clue_rounds or all_at_once:
                fail("clue extraction while visual feedback is unavailable", index)
            if nxt.round_index != round_index:
                fail("vif recorded outside its round", index)
            if round_index >= max_rounds:
                fail("clue extraction beyond the round budget", index)
            expected_kind = config.clue_order[len(kinds_used)]
            if nxt.kind != expected_kind:
                fail(f"clue kinds out of order: got {nxt.kind}, expected {expected_kind}", index)
            kinds_used.append(nxt.kind)
            round_index += 1
            index += 1
            continue
        if isinstance(nxt, FallbackEvent) and nxt.rule == FALLBACK_IAV_EXHAUSTED:
            if not any_iav_failure:
                fail("max-score fallback without any failed iav", index)
            index += 1
            if index != total:
                fail("events continue after a terminal fallback", index)
            return
        fail(f"unexpected event after round {round_index}: {nxt}", index)

    if round_index > max_rounds:
        raise TraceInvalid(f"trace used {round_index} rounds, budget is {max_rounds}")
