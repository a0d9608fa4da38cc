"""Deterministic transcript-backed mock for every backend role.

A transcript is JSONL, one entry per request the pipeline may make:

    {"role": "select", "request_fingerprint": "<sha256>", "response": {"text": "..."}}

Roles and response shapes: select -> {"text"}, embed -> {"vector"},
xmodal -> {"score"}, i2t -> {"text"}, summarize -> {"text"}. In strict mode a
missing entry raises MockMiss; lenient mode answers role defaults instead
(first candidate, zero vector, 0.0, empty text, unchanged text).
"""

import json
import math
from pathlib import Path

from ..errors import DimensionMismatch, MockMiss
from .base import (
    Backends,
    SelectorRequest,
    SelectorResponse,
    VisualClue,
    fingerprint_embed,
    fingerprint_i2t,
    fingerprint_select,
    fingerprint_select_request,
    fingerprint_summarize,
    fingerprint_xmodal,
    parse_selector_text,
)

ROLES = ("select", "embed", "xmodal", "i2t", "summarize")


class MockBackend:
    """Serves all five backend roles from an in-memory transcript table."""

    def __init__(self, strict: bool = True, embed_dim: int = 2):
        self.strict = strict
        self.embed_dim = embed_dim
        self._entries: dict[tuple[str, str], dict] = {}
        self.calls: list[tuple[str, str]] = []

    # -- transcript management ------------------------------------------------

    def add_entry(self, role: str, fingerprint: str, response: dict) -> None:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        key = (role, fingerprint)
        if key in self._entries and self._entries[key] != response:
            raise ValueError(f"conflicting transcript entry for {role}:{fingerprint}")
        self._entries[key] = response

    @classmethod
    def load(cls, path: str | Path, strict: bool = True) -> "MockBackend":
        backend = cls(strict=strict)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    backend.add_entry(obj["role"], obj["request_fingerprint"], obj["response"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad transcript line: {exc}") from exc
        dims = {
            len(resp["vector"])
            for (role, _), resp in backend._entries.items()
            if role == "embed"
        }
        if len(dims) > 1:
            raise DimensionMismatch(f"transcript mixes embedding dimensions: {sorted(dims)}")
        if dims:
            backend.embed_dim = dims.pop()
        return backend

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (role, fingerprint), response in sorted(self._entries.items()):
                fh.write(
                    json.dumps(
                        {"role": role, "request_fingerprint": fingerprint, "response": response},
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                    + "\n"
                )

    def _lookup(self, role: str, fingerprint: str) -> dict | None:
        self.calls.append((role, fingerprint))
        entry = self._entries.get((role, fingerprint))
        if entry is None and self.strict:
            raise MockMiss(role, fingerprint)
        return entry

    # -- scripting helpers ----------------------------------------------------

    def script_select(self, req: SelectorRequest, answer: str) -> None:
        self.add_entry("select", fingerprint_select_request(req), {"text": answer})

    def script_select_raw(self, instruction, mention, context, clues, candidates, temperature, answer) -> None:
        fp = fingerprint_select(instruction, mention, context, clues, candidates, temperature)
        self.add_entry("select", fp, {"text": answer})

    def script_embed(self, text: str, vector) -> None:
        self.add_entry("embed", fingerprint_embed(text), {"vector": [float(v) for v in vector]})

    def script_xmodal(self, text: str, image: bytes, score: float) -> None:
        self.add_entry("xmodal", fingerprint_xmodal(text, image), {"score": float(score)})

    def script_clue(self, image: bytes, kind: str, text: str) -> None:
        self.add_entry("i2t", fingerprint_i2t(image, kind), {"text": text})

    def script_summary(self, text: str, max_chars: int, out: str) -> None:
        self.add_entry("summarize", fingerprint_summarize(text, max_chars), {"text": out})

    # -- the five roles ---------------------------------------------------------

    def select_entity(self, req: SelectorRequest) -> SelectorResponse:
        entry = self._lookup("select", fingerprint_select_request(req))
        if entry is None:
            raw = req.candidates[0][0] if req.candidates else "nil"
        else:
            raw = entry["text"]
        names = [name for name, _ in req.candidates]
        return SelectorResponse(choice=parse_selector_text(raw, names), raw_text=raw)

    def embed(self, text: str) -> tuple[float, ...]:
        entry = self._lookup("embed", fingerprint_embed(text))
        if entry is None:
            return (0.0,) * self.embed_dim
        vector = tuple(float(v) for v in entry["vector"])
        if len(vector) != self.embed_dim:
            raise DimensionMismatch(
                f"embedding of length {len(vector)} from a backend of dimension {self.embed_dim}"
            )
        if not all(math.isfinite(v) for v in vector):
            raise DimensionMismatch("non-finite embedding component")
        return vector

    def cross_modal_score(self, text: str, image: bytes) -> float:
        entry = self._lookup("xmodal", fingerprint_xmodal(text, image))
        return 0.0 if entry is None else float(entry["score"])

    def extract_visual_clue(self, image: bytes, kind: str) -> VisualClue:
        entry = self._lookup("i2t", fingerprint_i2t(image, kind))
        return VisualClue(kind=kind, text="" if entry is None else entry["text"])

    def summarize(self, text: str, max_chars: int) -> str:
        entry = self._lookup("summarize", fingerprint_summarize(text, max_chars))
        return text if entry is None else entry["text"]


def mock_backends(path: str | Path, strict: bool = True) -> Backends:
    """All five roles served by one transcript file."""
    backend = MockBackend.load(path, strict=strict)
    return Backends.single(backend, description={"mock_transcript": str(path), "strict": strict})
