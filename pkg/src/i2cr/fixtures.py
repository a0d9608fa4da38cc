"""Synthetic corpora with fully scripted transcripts, for experiments and tests.

The steering corpus is built so the right answer is knowable by construction:
60% of samples resolve from text alone, and each remaining tenth needs one
specific visual clue kind before the selector names the gold entity. The
transcript scripts every request the engine can make under any clue order and
any enabled-kind subset, so the same fixture drives ablations, round-by-round
curves, and clue-order sweeps.
"""

import itertools
import json
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .backends.base import CLUE_KINDS, VisualClue
from .backends.mock import MockBackend, mock_backends
from .config import PipelineConfig, apply_ablation
from .evaluation import EvalReport, run_eval
from .instructions import load_dataset_jsonl
from .kg import EntityRecord, KgSnapshot, load_kg, serialize_kg
from .pipeline import MentionSample, build_entity_context, build_mention_context
from .retrieval import retrieve_topk

_GOLD_WORDS = (
    "amber", "birch", "cedar", "dune", "ember", "fjord", "garnet", "harbor",
    "iris", "juniper", "krill", "lumen", "meadow", "nectar", "onyx", "prairie",
)
_NOISE_WORDS = (
    "quartz", "rook", "sable", "thicket", "umber", "vale", "willow", "xenon",
    "yarrow", "zephyr", "bastion", "cinder",
)

IAV_PASS_SCORE = 40.0
IAV_FAIL_SCORE = 10.0


@dataclass(frozen=True)
class SteeringFixture:
    root: Path
    kg_path: Path
    dataset_path: Path
    transcript_path: Path
    config_path: Path
    sample_kinds: tuple[str, ...]  # per sample: "text" or the clue kind it needs
    expected_round_accuracy: dict[int, float]

    @property
    def expected_text_only_accuracy(self) -> float:
        return self.expected_round_accuracy[1]


def _clue_text(index: int, kind: str, trigger: bool) -> str:
    if trigger:
        return f"{kind} evidence names entry {index:03d}"
    return f"{kind} shows a routine scene {index:03d}"


def _all_clue_prefixes() -> list[tuple[str, ...]]:
    """Every extraction sequence any clue order can produce: 65 in total."""
    prefixes = {()}
    for perm in itertools.permutations(CLUE_KINDS):
        for length in range(1, len(CLUE_KINDS) + 1):
            prefixes.add(perm[:length])
    return sorted(prefixes, key=lambda p: (len(p), p))


def make_steering_fixture(
    out_dir: str | Path,
    n_samples: int = 200,
    seed: int = 0,
    k: int = 10,
    alpha: float = 0.5,
    beta: float = 31.0,
    n_distractors: int = 60,
) -> SteeringFixture:
    if n_samples % 10 != 0 or n_samples <= 0:
        raise ValueError("n_samples must be a positive multiple of 10")
    root = Path(out_dir)
    images_dir = root / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rnd = random.Random(seed)

    per_kind = n_samples // 10
    kinds_per_sample = ["text"] * (n_samples - 4 * per_kind)
    for kind in CLUE_KINDS:
        kinds_per_sample += [kind] * per_kind
    rnd.shuffle(kinds_per_sample)

    config = PipelineConfig(k=k, alpha=alpha, beta=beta)

    entities: list[EntityRecord] = []
    samples: list[dict] = []
    for index, needed in enumerate(kinds_per_sample):
        name = f"{rnd.choice(_GOLD_WORDS)} {rnd.choice(_GOLD_WORDS)} {index:03d}"
        gold = EntityRecord(
            id=f"g{index:03d}", name=name, description=f"profile of {name}"
        )
        entities.append(gold)
        entry = {"index": index, "needed": needed, "gold": gold, "decoy": None}
        if needed != "text":
            decoy_name = f"{name} variant"
            entry["decoy"] = EntityRecord(
                id=f"d{index:03d}", name=decoy_name, description=f"profile of {decoy_name}"
            )
            entities.append(entry["decoy"])
        samples.append(entry)
    for index in range(n_distractors):
        name = f"{rnd.choice(_NOISE_WORDS)} {rnd.choice(_NOISE_WORDS)} x{index:03d}"
        entities.append(EntityRecord(id=f"x{index:03d}", name=name, description=f"profile of {name}"))

    kg = KgSnapshot(entities)
    kg_path = root / "kg.jsonl"
    serialize_kg(kg, kg_path)

    mock = MockBackend()
    dataset_lines = []
    prefixes = _all_clue_prefixes()
    for entry in samples:
        index, needed, gold, decoy = entry["index"], entry["needed"], entry["gold"], entry["decoy"]
        image = f"image-bytes-{index:03d}".encode()
        image_name = f"images/img_{index:03d}.bin"
        (root / image_name).write_bytes(image)

        sample = MentionSample(
            mention=gold.name,
            context=f"spotted near venue {index:03d}",
            image=image,
            gold_id=gold.id,
        )
        dataset_lines.append(
            {"mention": sample.mention, "context": sample.context, "image": image_name, "gold_id": gold.id}
        )

        pool = retrieve_topk(sample.mention, kg, k)
        candidates = tuple((kg[c.entity_id].name, kg[c.entity_id].description) for c in pool.entries)

        for prefix in prefixes:
            clues = tuple(
                VisualClue(kind, _clue_text(index, kind, trigger=kind == needed)) for kind in prefix
            )
            resolved = needed == "text" or needed in prefix
            answer = gold.name if resolved else entry["decoy"].name
            mock.script_select_raw(
                config.instruction_template,
                sample.mention,
                sample.context,
                [(c.kind, c.text) for c in clues],
                candidates,
                config.temperature,
                answer,
            )
            mock.script_embed(build_mention_context(sample, clues), (1.0, 0.0))

        mock.script_embed(build_entity_context(gold), (1.0, 0.0))
        mock.script_xmodal(gold.description, image, IAV_PASS_SCORE)
        if decoy is not None:
            mock.script_embed(build_entity_context(decoy), (1.0, 0.0))
            mock.script_xmodal(decoy.description, image, IAV_FAIL_SCORE)
        for kind in CLUE_KINDS:
            mock.script_clue(image, kind, _clue_text(index, kind, trigger=kind == needed))

    transcript_path = root / "transcript.jsonl"
    mock.save(transcript_path)

    dataset_path = root / "dataset.jsonl"
    with dataset_path.open("w", encoding="utf-8") as fh:
        for line in dataset_lines:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")

    config_path = root / "run.conf"
    config_path.write_text(
        f"k = {k}\nalpha = {alpha}\nbeta = {beta}\n"
        f"mock_transcript = {transcript_path.resolve()}\n",
        encoding="utf-8",
    )

    text_count = n_samples - 4 * per_kind
    expectations = {
        r: (text_count + (r - 1) * per_kind) / n_samples for r in range(1, 6)
    }
    return SteeringFixture(
        root=root,
        kg_path=kg_path,
        dataset_path=dataset_path,
        transcript_path=transcript_path,
        config_path=config_path,
        sample_kinds=tuple(kinds_per_sample),
        expected_round_accuracy=expectations,
    )


@dataclass
class SteeringOutcome:
    text_only: EvalReport
    by_round_budget: dict[int, EvalReport]  # budget r: clue kinds limited to r-1
    all_clues_at_once: EvalReport

    @property
    def full(self) -> EvalReport:
        return self.by_round_budget[max(self.by_round_budget)]

    def table(self) -> str:
        from .evaluation import format_report_table

        reports = [self.text_only] + [self.by_round_budget[r] for r in sorted(self.by_round_budget)]
        reports.append(self.all_clues_at_once)
        return format_report_table(reports)


def run_steering_experiment(fixture: SteeringFixture, workers: int = 4) -> SteeringOutcome:
    """Text-only baseline, cumulative round budgets, and single-shot clue mode."""
    kg = load_kg(fixture.kg_path)
    samples = load_dataset_jsonl(fixture.dataset_path)
    backends = mock_backends(fixture.transcript_path)
    from .config import load_app_config

    base = load_app_config(fixture.config_path, env={}).pipeline

    text_only = run_eval(
        samples, kg, backends, apply_ablation(base, "bcd"),
        k_list=(1,), workers=workers, label="w/o bcd", delta_token="bcd",
    )
    by_round: dict[int, EvalReport] = {}
    for budget in range(1, len(base.clue_order) + 2):
        limited = base.with_clue_order(base.clue_order[: budget - 1])
        by_round[budget] = run_eval(
            samples, kg, backends, limited,
            k_list=(1,), workers=workers, label=f"rounds<={budget}",
        )
    one_shot = run_eval(
        samples, kg, backends, replace(base, all_clues_first_round=True),
        k_list=(1,), workers=workers, label="all clues at once",
    )
    return SteeringOutcome(text_only=text_only, by_round_budget=by_round, all_clues_at_once=one_shot)


def run_clue_order_sweep(fixture: SteeringFixture, workers: int = 4) -> list[tuple[tuple[str, ...], EvalReport]]:
    """Evaluate every permutation of the four clue kinds on the fixture."""
    kg = load_kg(fixture.kg_path)
    samples = load_dataset_jsonl(fixture.dataset_path)
    backends = mock_backends(fixture.transcript_path)
    from .config import load_app_config

    base = load_app_config(fixture.config_path, env={}).pipeline
    results = []
    for perm in itertools.permutations(CLUE_KINDS):
        config = base.with_clue_order(perm)
        report = run_eval(
            samples, kg, backends, config, k_list=(1,), workers=workers, label="-".join(perm)
        )
        results.append((perm, report))
    return results


def make_instruction_fixture(
    out_dir: str | Path,
    n_in_topk: int = 80,
    n_outside: int = 10,
    n_out_of_kg: int = 10,
    seed: int = 0,
    k: int = 10,
) -> tuple[Path, Path]:
    """KG + dataset where retrieval recall is known by construction.

    Returns (kg_path, dataset_path). The "outside" samples carry a gold whose
    name shares nothing with the mention while k closer-named fillers crowd
    the candidate list, so the exporter must inject the gold.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rnd = random.Random(seed)

    entities: list[EntityRecord] = []
    dataset: list[dict] = []
    for index in range(n_in_topk):
        name = f"{rnd.choice(_GOLD_WORDS)} easy {index:03d}"
        entities.append(EntityRecord(id=f"e{index:03d}", name=name, description=f"about {name}"))
        dataset.append({"mention": name, "context": f"ctx {index}", "gold_id": f"e{index:03d}"})
    for index in range(n_outside):
        mention = f"common term {index:03d}"
        gold_id = f"h{index:03d}"
        entities.append(
            EntityRecord(id=gold_id, name=f"obscure target {index:03d}", description="hard to retrieve")
        )
        for filler in range(k):
            entities.append(
                EntityRecord(
                    id=f"f{index:03d}{filler:02d}",
                    name=f"{mention} filler {filler:02d}",
                    description="crowding candidate",
                )
            )
        dataset.append({"mention": mention, "context": f"hard ctx {index}", "gold_id": gold_id})
    for index in range(n_out_of_kg):
        dataset.append({"mention": f"ghost mention {index:03d}", "context": "", "out_of_kg": True})

    kg_path = root / "kg.jsonl"
    serialize_kg(KgSnapshot(entities), kg_path)
    dataset_path = root / "dataset.jsonl"
    with dataset_path.open("w", encoding="utf-8") as fh:
        for line in dataset:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    return kg_path, dataset_path
