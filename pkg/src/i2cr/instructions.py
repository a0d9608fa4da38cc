"""Export instruction-tuning records so the selector can be fine-tuned elsewhere.

One JSONL record per training sample: the fixed instruction, a structured
input (mention, context, retrieved candidates), and the answer the model
should produce, which is either a candidate name or the literal "nil".
When retrieval misses the gold entity it is injected in place of the
lowest-ranked candidate, so every record stays supervisable; the miss rate
is reported rather than hidden.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .errors import MissingGoldError
from .kg import KgSnapshot
from .pipeline import MentionSample
from .retrieval import CandidateSet, retrieve_topk

NIL_OUTPUT = "nil"


@dataclass(frozen=True)
class ExportStats:
    written: int
    gold_in_topk: int
    gold_injected: int
    nil_records: int

    @property
    def gold_in_topk_rate(self) -> float:
        supervised = self.gold_in_topk + self.gold_injected
        return self.gold_in_topk / supervised if supervised else 1.0

    def summary(self) -> str:
        return (
            f"{self.written} records written; gold already retrieved for "
            f"{self.gold_in_topk} ({self.gold_in_topk_rate:.1%}), injected for "
            f"{self.gold_injected}; {self.nil_records} out-of-KG records"
        )


def build_instruction_record(
    sample: MentionSample,
    kg: KgSnapshot,
    candidates: CandidateSet,
    instruction: str,
) -> tuple[dict, bool]:
    """One record plus whether the gold had to be injected."""
    records = [kg[c.entity_id] for c in candidates.entries]
    injected = False
    if sample.out_of_kg:
        output = NIL_OUTPUT
    else:
        gold = kg.get(sample.gold_id)
        if gold is None:
            raise MissingGoldError(-1, f"gold_id {sample.gold_id!r} not in the snapshot")
        if all(r.id != gold.id for r in records):
            # keep the label learnable: the gold replaces the weakest candidate
            injected = True
            if records:
                records[-1] = gold
            else:
                records.append(gold)
        output = gold.name
    record = {
        "instruction": instruction,
        "input": {
            "mention": sample.mention,
            "context": sample.context,
            "candidates": [{"name": r.name, "description": r.description} for r in records],
        },
        "output": output,
    }
    return record, injected


def export_instructions(
    dataset: Sequence[MentionSample],
    kg: KgSnapshot,
    k: int,
    out: str | Path,
    instruction: str | None = None,
    retriever: Callable[[str, KgSnapshot, int], CandidateSet] = retrieve_topk,
) -> ExportStats:
    """Write one instruction record per sample; returns the export statistics."""
    from .config import DEFAULT_INSTRUCTION

    template = instruction if instruction is not None else DEFAULT_INSTRUCTION
    in_topk = injected_count = nils = written = 0
    out_path = Path(out)
    with out_path.open("w", encoding="utf-8") as fh:
        for index, sample in enumerate(dataset):
            if sample.gold_id is None and not sample.out_of_kg:
                raise MissingGoldError(index)
            candidates = retriever(sample.mention, kg, k)
            try:
                record, injected = build_instruction_record(sample, kg, candidates, template)
            except MissingGoldError as exc:
                raise MissingGoldError(index, str(exc)) from exc
            if sample.out_of_kg:
                nils += 1
            elif injected:
                injected_count += 1
            else:
                in_topk += 1
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            written += 1
    return ExportStats(
        written=written,
        gold_in_topk=in_topk,
        gold_injected=injected_count,
        nil_records=nils,
    )


def validate_instruction_record(record: dict, k: int) -> None:
    """Raise ValueError unless the record satisfies the export contract."""
    if not isinstance(record, dict):
        raise ValueError("record must be an object")
    for key in ("instruction", "input", "output"):
        if key not in record:
            raise ValueError(f"missing field {key!r}")
    if not isinstance(record["instruction"], str) or not record["instruction"]:
        raise ValueError("instruction must be a non-empty string")
    payload = record["input"]
    if not isinstance(payload, dict):
        raise ValueError("input must be an object")
    for key in ("mention", "context", "candidates"):
        if key not in payload:
            raise ValueError(f"input missing field {key!r}")
    if not isinstance(payload["mention"], str) or not payload["mention"]:
        raise ValueError("mention must be a non-empty string")
    candidates = payload["candidates"]
    if not isinstance(candidates, list) or len(candidates) > k:
        raise ValueError(f"candidates must be a list of at most {k} entries")
    names = []
    for candidate in candidates:
        if not isinstance(candidate, dict) or "name" not in candidate or "description" not in candidate:
            raise ValueError("every candidate must carry name and description")
        names.append(candidate["name"])
    output = record["output"]
    if output != NIL_OUTPUT and output not in names:
        raise ValueError(f"output {output!r} is neither {NIL_OUTPUT!r} nor a candidate name")


def validate_instruction_file(path: str | Path, k: int) -> int:
    """Validate every line; returns the record count."""
    count = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                validate_instruction_record(json.loads(line), k)
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            count += 1
    return count


def load_dataset_jsonl(path: str | Path) -> list[MentionSample]:
    """Read mention samples; image paths resolve relative to the dataset file."""
    base = Path(path).parent
    samples: list[MentionSample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            image: bytes | None = None
            if obj.get("image"):
                image = (base / obj["image"]).read_bytes()
            try:
                samples.append(
                    MentionSample(
                        mention=obj.get("mention", ""),
                        context=obj.get("context", ""),
                        image=image,
                        gold_id=obj.get("gold_id"),
                        out_of_kg=bool(obj.get("out_of_kg", False)),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return samples
