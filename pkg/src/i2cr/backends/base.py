"""Shared types and contracts for the pluggable model backends.

Five roles, one interface each: entity selector, text embedder, cross-modal
scorer, visual clue extractor, and description summarizer. Adapters key mock
transcripts on a canonical fingerprint of the semantic request fields, never
on wire bytes, so transport refactors do not invalidate recorded transcripts.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from ..errors import UnparseableResponse

CLUE_KINDS = ("ocr", "cap", "den", "tag")

NIL_MARKER = "nil"  # wire form, matched case-insensitively


@dataclass(frozen=True)
class VisualClue:
    """Text extracted from the mention image by one image-to-text model."""

    kind: str
    text: str

    def __post_init__(self):
        if self.kind not in CLUE_KINDS:
            raise ValueError(f"unknown clue kind {self.kind!r}; expected one of {CLUE_KINDS}")


@dataclass(frozen=True)
class SelectorRequest:
    instruction: str
    mention: str
    context: str
    visual_clues: tuple[VisualClue, ...] = ()
    candidates: tuple[tuple[str, str], ...] = ()  # (name, description), ranked
    temperature: float = 0.9
    allow_nil_only: bool = False

    def __post_init__(self):
        if not self.candidates and not self.allow_nil_only:
            raise ValueError("candidates must be non-empty unless allow_nil_only is set")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")


@dataclass(frozen=True)
class SelectorResponse:
    choice: str | None  # candidate name, or None for nil
    raw_text: str


def parse_selector_text(raw: str, candidate_names: Sequence[str]) -> str | None:
    """Resolve raw selector output to a candidate name or the nil answer.

    Exact trimmed match wins; then the nil marker; then a unique
    case-insensitive match. Anything else raises rather than guessing.
    """
    text = raw.strip()
    if text in candidate_names:
        return text
    if text.casefold() == NIL_MARKER:
        return None
    folded = text.casefold()
    loose = [name for name in candidate_names if name.casefold() == folded]
    if len(loose) == 1:
        return loose[0]
    raise UnparseableResponse(raw)


def _fingerprint(role: str, payload: dict) -> str:
    canon = json.dumps({"role": role, **payload}, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def image_digest(image: bytes) -> str:
    return hashlib.sha256(image).hexdigest()


def fingerprint_select(
    instruction: str,
    mention: str,
    context: str,
    clues: Sequence[tuple[str, str]],
    candidates: Sequence[tuple[str, str]],
    temperature: float,
) -> str:
    return _fingerprint(
        "select",
        {
            "instruction": instruction,
            "mention": mention,
            "context": context,
            "clues": [list(c) for c in clues],
            "candidates": [list(c) for c in candidates],
            "temperature": temperature,
        },
    )


def fingerprint_select_request(req: SelectorRequest) -> str:
    return fingerprint_select(
        req.instruction,
        req.mention,
        req.context,
        [(c.kind, c.text) for c in req.visual_clues],
        req.candidates,
        req.temperature,
    )


def fingerprint_embed(text: str) -> str:
    return _fingerprint("embed", {"text": text})


def fingerprint_xmodal(text: str, image: bytes) -> str:
    return _fingerprint("xmodal", {"text": text, "image_sha256": image_digest(image)})


def fingerprint_i2t(image: bytes, kind: str) -> str:
    return _fingerprint("i2t", {"image_sha256": image_digest(image), "kind": kind})


def fingerprint_summarize(text: str, max_chars: int) -> str:
    return _fingerprint("summarize", {"text": text, "max_chars": max_chars})


class Selector(Protocol):
    def select_entity(self, req: SelectorRequest) -> SelectorResponse: ...


class Embedder(Protocol):
    def embed(self, text: str) -> tuple[float, ...]: ...


class CrossModalScorer(Protocol):
    def cross_modal_score(self, text: str, image: bytes) -> float: ...


class ClueExtractor(Protocol):
    def extract_visual_clue(self, image: bytes, kind: str) -> VisualClue: ...


class Summarizer(Protocol):
    def summarize(self, text: str, max_chars: int) -> str: ...


@dataclass
class Backends:
    """The five model handles the pipeline consumes.

    One object may serve several roles (the transcript mock serves all five).
    """

    selector: Selector
    embedder: Embedder
    xmodal: CrossModalScorer
    extractor: ClueExtractor
    summarizer: Summarizer
    description: dict = field(default_factory=dict)  # endpoints/transcript, for manifests

    @classmethod
    def single(cls, backend, description: dict | None = None) -> "Backends":
        return cls(
            selector=backend,
            embedder=backend,
            xmodal=backend,
            extractor=backend,
            summarizer=backend,
            description=description or {},
        )
