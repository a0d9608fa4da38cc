"""Knowledge-graph snapshot: load, validate, summarize, serialize.

A snapshot is immutable once built; summarization returns a new snapshot.
The digest is a sha256 over the canonical JSONL form of the records, so two
snapshots with equal records share a digest regardless of the ingest format.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DuplicateIdError, ParseError, SummarizationError

KG_FORMATS = ("jsonl", "tsv")


@dataclass(frozen=True)
class EntityRecord:
    """One knowledge-graph entity."""

    id: str
    name: str
    description: str = ""
    aliases: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("entity id must be non-empty")
        if not self.name:
            raise ValueError(f"entity {self.id!r}: name must be non-empty")
        if not isinstance(self.aliases, tuple):
            object.__setattr__(self, "aliases", tuple(self.aliases))


class KgSnapshot:
    """Id-indexed, read-only collection of entity records.

    Iteration order is ascending id. Safe to share across threads.
    """

    def __init__(self, records: Iterable[EntityRecord]):
        by_id: dict[str, EntityRecord] = {}
        for rec in records:
            if rec.id in by_id:
                raise ValueError(f"duplicate entity id {rec.id!r}")
            by_id[rec.id] = rec
        self._records = {eid: by_id[eid] for eid in sorted(by_id)}
        self._digest: str | None = None

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EntityRecord]:
        return iter(self._records.values())

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._records

    def __getitem__(self, entity_id: str) -> EntityRecord:
        return self._records[entity_id]

    def get(self, entity_id: str) -> EntityRecord | None:
        return self._records.get(entity_id)

    def ids(self) -> tuple[str, ...]:
        return tuple(self._records)

    @property
    def source_digest(self) -> str:
        if self._digest is None:
            self._digest = hashlib.sha256(dumps_kg(self).encode("utf-8")).hexdigest()
        return self._digest

    def __eq__(self, other) -> bool:
        if not isinstance(other, KgSnapshot):
            return NotImplemented
        return self._records == other._records

    def __hash__(self) -> int:
        return hash(self.source_digest)

    def __repr__(self) -> str:
        return f"KgSnapshot({len(self)} entities, digest={self.source_digest[:12]})"


def _record_to_obj(rec: EntityRecord) -> dict:
    obj = {"id": rec.id, "name": rec.name, "description": rec.description}
    if rec.aliases:
        obj["aliases"] = list(rec.aliases)
    return obj


def dumps_kg(kg: KgSnapshot) -> str:
    """Canonical JSONL serialization: ascending id, compact separators."""
    lines = (json.dumps(_record_to_obj(rec), ensure_ascii=False, separators=(",", ":")) for rec in kg)
    return "".join(line + "\n" for line in lines)


def serialize_kg(kg: KgSnapshot, path: str | Path) -> None:
    Path(path).write_text(dumps_kg(kg), encoding="utf-8")


def _parse_jsonl_line(line: str, lineno: int) -> EntityRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError(lineno, "expected a JSON object")
    eid = obj.get("id")
    name = obj.get("name")
    if not isinstance(eid, str) or not eid:
        raise ParseError(lineno, "missing or empty 'id'")
    if not isinstance(name, str) or not name:
        raise ParseError(lineno, "missing or empty 'name'")
    description = obj.get("description", "")
    if not isinstance(description, str):
        raise ParseError(lineno, "'description' must be a string")
    aliases = obj.get("aliases", [])
    if not isinstance(aliases, list) or any(not isinstance(a, str) for a in aliases):
        raise ParseError(lineno, "'aliases' must be a list of strings")
    return EntityRecord(id=eid, name=name, description=description, aliases=tuple(aliases))


def _parse_tsv_line(line: str, lineno: int) -> EntityRecord:
    parts = line.split("\t", 2)
    if len(parts) != 3:
        raise ParseError(lineno, "expected id<TAB>name<TAB>description")
    eid, name, description = parts
    if not eid:
        raise ParseError(lineno, "empty 'id'")
    if not name:
        raise ParseError(lineno, "empty 'name'")
    return EntityRecord(id=eid, name=name, description=description)


def infer_kg_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".json", ".ndjson"):
        return "jsonl"
    if suffix in (".tsv", ".tab"):
        return "tsv"
    raise ValueError(f"cannot infer KG format from {path!r}; pass format explicitly")


def load_kg(path: str | Path, format: str | None = None) -> KgSnapshot:
    """Read a snapshot from a JSONL or TSV file. Blank lines are skipped."""
    fmt = format or infer_kg_format(path)
    if fmt not in KG_FORMATS:
        raise ValueError(f"unknown KG format {fmt!r}; expected one of {KG_FORMATS}")
    parse = _parse_jsonl_line if fmt == "jsonl" else _parse_tsv_line

    raw = Path(path).read_bytes()
    records: dict[str, EntityRecord] = {}
    for lineno, raw_line in enumerate(raw.split(b"\n"), start=1):
        try:
            line = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(lineno, f"invalid UTF-8: {exc.reason}") from exc
        if not line.strip():
            continue
        try:
            rec = parse(line, lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(lineno, str(exc)) from exc
        if rec.id in records:
            raise DuplicateIdError(rec.id, lineno)
        records[rec.id] = rec
    return KgSnapshot(records.values())


@dataclass
class SummarizeReport:
    """What summarize_descriptions changed."""

    summarized: int = 0
    unchanged: int = 0
    changed_ids: list[str] = field(default_factory=list)


def summarize_descriptions(kg: KgSnapshot, summarizer, max_chars: int) -> tuple[KgSnapshot, SummarizeReport]:
    """Replace every description longer than max_chars with summarizer output.

    Descriptions at or under the limit are untouched. On a backend failure the
    whole operation aborts with a SummarizationError carrying how many
    descriptions had already been summarized; no partial snapshot escapes.
    """
    if max_chars < 1:
        raise ValueError("max_chars must be a positive integer")
    report = SummarizeReport()
    out: list[EntityRecord] = []
    for rec in kg:
        if len(rec.description) > max_chars:
            try:
                new_desc = summarizer.summarize(rec.description, max_chars)
            except Exception as exc:
                raise SummarizationError(rec.id, report.summarized, exc) from exc
            out.append(EntityRecord(rec.id, rec.name, new_desc, rec.aliases))
            report.summarized += 1
            report.changed_ids.append(rec.id)
        else:
            out.append(rec)
            report.unchanged += 1
    return KgSnapshot(out), report
