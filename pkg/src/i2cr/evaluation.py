"""Batch evaluation: top-K accuracy, average response time, ablation sweeps.

A nil gold (out-of-KG sample) counts as correct only when the prediction list
is exactly the nil singleton; the alternative "ignore_nil" mode drops such
samples from both numerator and denominator. Per-sample failures never abort
a run below the failure-rate cap; they score as incorrect and carry an error
tag in the report.
"""

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .backends.base import Backends
from .config import PipelineConfig, ablation_label, apply_ablation
from .errors import EmptyEvalSetError, FailureCapExceeded, I2crError, MissingGoldError
from .kg import KgSnapshot
from .pipeline import MentionSample, link_topk

NIL_MODES = ("strict", "ignore_nil")


@dataclass(frozen=True)
class EvalRecord:
    index: int
    mention: str
    gold_id: str | None
    nil_gold: bool
    prediction: str | None
    ranked: tuple[str | None, ...]
    wall_time: float
    correct_at: dict[int, bool] = field(default_factory=dict)
    error: str | None = None


def record_correct_at(record: EvalRecord, k: int, nil_mode: str = "strict") -> bool | None:
    """True/False, or None when the record is excluded under ignore_nil."""
    if record.nil_gold:
        if nil_mode == "ignore_nil":
            return None
        return record.ranked == (None,)
    return record.gold_id in record.ranked[:k]


def topk_accuracy(records: Sequence[EvalRecord], k: int, nil_mode: str = "strict") -> float:
    if nil_mode not in NIL_MODES:
        raise ValueError(f"nil_mode must be one of {NIL_MODES}")
    outcomes = [record_correct_at(r, k, nil_mode) for r in records]
    scored = [o for o in outcomes if o is not None]
    if not scored:
        raise EmptyEvalSetError("no scorable records")
    return sum(scored) / len(scored)


def avg_response_time(records: Sequence[EvalRecord]) -> float:
    if not records:
        raise EmptyEvalSetError("no records")
    return sum(r.wall_time for r in records) / len(records)


@dataclass
class EvalReport:
    label: str
    accuracies: dict[int, float]
    avg_time_seconds: float
    sample_count: int
    records: list[EvalRecord]
    config_fingerprint: str
    k_list: tuple[int, ...]
    nil_mode: str
    failures: int
    delta_token: str | None = None

    def to_jsonable(self) -> dict:
        """Deterministic payload: everything except wall-clock timings."""
        return {
            "label": self.label,
            "delta_token": self.delta_token,
            "config_fingerprint": self.config_fingerprint,
            "nil_mode": self.nil_mode,
            "k_list": list(self.k_list),
            "sample_count": self.sample_count,
            "failures": self.failures,
            "accuracies": {str(k): self.accuracies[k] for k in self.k_list},
            "records": [
                {
                    "index": r.index,
                    "mention": r.mention,
                    "gold_id": r.gold_id,
                    "nil_gold": r.nil_gold,
                    "prediction": r.prediction,
                    "ranked": list(r.ranked),
                    "correct_at": {str(k): v for k, v in sorted(r.correct_at.items())},
                    "error": r.error,
                }
                for r in self.records
            ],
        }

    def timings_jsonable(self) -> dict:
        return {
            "avg_time_seconds": self.avg_time_seconds,
            "per_sample_seconds": [r.wall_time for r in self.records],
        }


def run_eval(
    dataset: Sequence[MentionSample],
    kg: KgSnapshot,
    backends: Backends,
    config: PipelineConfig,
    k_list: Sequence[int] = (1, 3, 5),
    nil_mode: str = "strict",
    workers: int = 4,
    failure_cap: float = 0.5,
    label: str = "full",
    delta_token: str | None = None,
) -> EvalReport:
    """Evaluate the whole dataset with bounded parallelism.

    The report is a pure function of (dataset order, snapshot, transcript,
    config): worker count only changes the schedule, never the content.
    """
    if nil_mode not in NIL_MODES:
        raise ValueError(f"nil_mode must be one of {NIL_MODES}")
    if not dataset:
        raise EmptyEvalSetError("dataset is empty")
    k_list = tuple(sorted(set(int(k) for k in k_list)))
    if not k_list or k_list[0] < 1:
        raise ValueError("k_list must contain positive integers")
    for index, sample in enumerate(dataset):
        if sample.gold_id is None and not sample.out_of_kg:
            raise MissingGoldError(index)

    k_max = k_list[-1]

    def evaluate_one(item: tuple[int, MentionSample]) -> EvalRecord:
        index, sample = item
        try:
            result = link_topk(sample, kg, backends, config, k_max)
            prediction, ranked, wall = result.prediction, result.topk or (), result.wall_time
            error = None
        except I2crError as exc:
            prediction, ranked, wall = None, (), 0.0
            error = f"{type(exc).__name__}: {exc}"
        return EvalRecord(
            index=index,
            mention=sample.mention,
            gold_id=sample.gold_id,
            nil_gold=sample.out_of_kg,
            prediction=prediction,
            ranked=tuple(ranked),
            wall_time=wall,
            error=error,
        )

    if workers <= 1:
        records = [evaluate_one(item) for item in enumerate(dataset)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(evaluate_one, enumerate(dataset)))
    records.sort(key=lambda r: r.index)

    failures = sum(1 for r in records if r.error is not None)
    if failures / len(records) > failure_cap:
        raise FailureCapExceeded(failures, len(records), failure_cap)

    for record in records:
        for k in k_list:
            outcome = record_correct_at(record, k, nil_mode)
            if outcome is not None:
                record.correct_at[k] = outcome

    return EvalReport(
        label=label,
        accuracies={k: topk_accuracy(records, k, nil_mode) for k in k_list},
        avg_time_seconds=avg_response_time(records),
        sample_count=len(records),
        records=records,
        config_fingerprint=config.fingerprint(),
        k_list=k_list,
        nil_mode=nil_mode,
        failures=failures,
        delta_token=delta_token,
    )


def run_ablation(
    dataset: Sequence[MentionSample],
    kg: KgSnapshot,
    backends: Backends,
    base_config: PipelineConfig,
    deltas: Sequence[str],
    **eval_kwargs,
) -> list[tuple[str, EvalReport]]:
    """One evaluation per config delta, same samples and order throughout."""
    reports: list[tuple[str, EvalReport]] = []
    seen: set[str] = set()
    for token in deltas:
        label = ablation_label(token)
        if label in seen:
            raise ValueError(f"duplicate ablation delta {token!r}")
        seen.add(label)
        config = apply_ablation(base_config, token)
        report = run_eval(
            dataset, kg, backends, config, label=label, delta_token=token.strip() or "full", **eval_kwargs
        )
        reports.append((label, report))
    return reports


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text accuracy table, one row per report."""
    if not reports:
        raise EmptyEvalSetError("no reports")
    k_list = reports[0].k_list
    width = max(16, max(len(r.label) for r in reports))
    header = ["run".ljust(width)] + [f"Top-{k}".rjust(7) for k in k_list] + ["Avg-Time(s)".rjust(12), "N".rjust(6)]
    lines = ["  ".join(header)]
    for report in reports:
        row = [report.label.ljust(width)]
        row += [f"{report.accuracies[k]:.3f}".rjust(7) for k in k_list]
        row += [f"{report.avg_time_seconds:.4f}".rjust(12), str(report.sample_count).rjust(6)]
        lines.append("  ".join(row))
    lines.append("")
    lines.append(
        "note: times include backend latency; transcript-mock runs report "
        "near-zero times and are not comparable to live services."
    )
    return "\n".join(lines)


def summarize_repeats(reports: Sequence[EvalReport]) -> dict:
    """Mean and sample standard deviation of accuracies over repeated runs."""
    if not reports:
        raise EmptyEvalSetError("no reports")
    k_list = reports[0].k_list
    out: dict = {"runs": len(reports), "per_k": {}}
    for k in k_list:
        values = [r.accuracies[k] for r in reports]
        out["per_k"][str(k)] = {
            "mean": statistics.fmean(values),
            "stddev": statistics.stdev(values) if len(values) > 1 else 0.0,
        }
    return out
