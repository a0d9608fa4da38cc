import random

import pytest

from i2cr.config import PipelineConfig
from i2cr.errors import EmptyEvalSetError, FailureCapExceeded, MissingGoldError
from i2cr.evaluation import (
    EvalRecord,
    avg_response_time,
    format_report_table,
    run_ablation,
    run_eval,
    summarize_repeats,
    topk_accuracy,
)
from i2cr.pipeline import MentionSample
from helpers import Scenario, ladder_kg, pool_records, sel_req

TES_ONLY = PipelineConfig().without_modules("bcd")


def make_record(index, gold, ranked, wall=0.0, nil_gold=False, error=None):
    return EvalRecord(
        index=index,
        mention=f"m{index}",
        gold_id=gold,
        nil_gold=nil_gold,
        prediction=ranked[0] if ranked else None,
        ranked=tuple(ranked),
        wall_time=wall,
        error=error,
    )


class TestMetrics:
    def test_fraction_example(self):
        records = [
            make_record(0, "a", ("a", "x")),
            make_record(1, "b", ("x", "b")),
            make_record(2, "c", ("x", "y")),
            make_record(3, "d", ("d",)),
        ]
        assert topk_accuracy(records, 2) == 0.75
        assert topk_accuracy(records, 1) == 0.5

    def test_all_correct(self):
        records = [make_record(i, "g", ("g",)) for i in range(5)]
        assert topk_accuracy(records, 1) == 1.0

    def test_nil_gold_strict_requires_nil_singleton(self):
        good = make_record(0, None, (None,), nil_gold=True)
        bad = make_record(1, None, ("a", None), nil_gold=True)
        assert topk_accuracy([good], 3) == 1.0
        assert topk_accuracy([good, bad], 3) == 0.5

    def test_nil_gold_ignored_mode(self):
        records = [
            make_record(0, "a", ("a",)),
            make_record(1, None, ("x",), nil_gold=True),
        ]
        assert topk_accuracy(records, 1, nil_mode="ignore_nil") == 1.0
        with pytest.raises(EmptyEvalSetError):
            topk_accuracy([records[1]], 1, nil_mode="ignore_nil")

    def test_empty_set_rejected(self):
        with pytest.raises(EmptyEvalSetError):
            topk_accuracy([], 1)

    def test_avg_time(self):
        records = [make_record(0, "a", ("a",), wall=1.0), make_record(1, "a", ("a",), wall=3.0)]
        assert avg_response_time(records) == 2.0
        assert avg_response_time(records[:1]) == 1.0
        with pytest.raises(EmptyEvalSetError):
            avg_response_time([])

    def test_matches_independent_recount(self):
        rnd = random.Random(42)
        ids = [f"g{i}" for i in range(12)]
        records = []
        for i in range(200):
            gold = rnd.choice(ids)
            ranked = rnd.sample(ids, k=rnd.randint(1, 6))
            records.append(make_record(i, gold, tuple(ranked), wall=rnd.uniform(0, 2)))
        for k in (1, 3, 5):
            hits = 0
            for r in records:
                hits += 1 if r.gold_id in list(r.ranked)[:k] else 0
            assert topk_accuracy(records, k) == hits / 200
        total = 0.0
        for r in records:
            total += r.wall_time
        assert avg_response_time(records) == total / 200


def eval_scenario(n_extra_fail=1):
    """Imageless TES-only dataset: predictable ranked lists via scripted picks."""
    kg = ladder_kg(5)
    samples = [
        MentionSample(mention="query", context="ctx 0", gold_id="e1"),
        MentionSample(mention="query", context="ctx 1", gold_id="e2"),
        MentionSample(mention="query", context="ctx 2", out_of_kg=True),
    ]
    if n_extra_fail:
        samples.append(MentionSample(mention="query", context="ctx fail", gold_id="e1"))
    sc = Scenario(name="eval", sample=samples[0], kg=kg, config=TES_ONLY)
    # collection keeps selecting until k accepted, so script the whole cascade
    names = ["query", "query b", "query bc", "query bcd", "query bcde"]
    name_to_id = dict(zip(names, ["e1", "e2", "e3", "e4", "e5"]))
    for sample in samples[:2]:
        excluded: list[str] = []
        for name in names:
            records = [r for r in pool_records(kg, sample, TES_ONLY) if r.id not in excluded]
            sc.mock.script_select(sel_req(TES_ONLY, sample, records), name)
            excluded.append(name_to_id[name])
    nil_sample = samples[2]
    sc.mock.script_select(
        sel_req(TES_ONLY, nil_sample, pool_records(kg, nil_sample, TES_ONLY)),
        "nil",
    )
    # "ctx fail" intentionally left unscripted: a strict-mock miss becomes an error tag
    return kg, samples, sc


class TestRunEval:
    def test_accuracies_and_errors(self):
        kg, samples, sc = eval_scenario()
        report = run_eval(samples, kg, sc.backends, TES_ONLY, k_list=(1, 3))
        assert report.sample_count == 4
        assert report.failures == 1
        by_index = {r.index: r for r in report.records}
        assert by_index[0].ranked == ("e1", "e2", "e3")
        assert by_index[1].correct_at == {1: False, 3: True}
        assert by_index[2].ranked == (None,) and by_index[2].correct_at[1] is True
        assert by_index[3].error is not None and "MockMiss" in by_index[3].error
        assert report.accuracies[1] == 0.5
        assert report.accuracies[3] == 0.75

    def test_accuracy_monotone_in_k(self):
        kg, samples, sc = eval_scenario()
        report = run_eval(samples, kg, sc.backends, TES_ONLY, k_list=(1, 2, 3, 5))
        values = [report.accuracies[k] for k in report.k_list]
        assert values == sorted(values)

    def test_parallelism_does_not_change_report(self):
        kg, samples, sc = eval_scenario()
        serial = run_eval(samples, kg, sc.backends, TES_ONLY, workers=1)
        threaded = run_eval(samples, kg, sc.backends, TES_ONLY, workers=8)
        assert serial.to_jsonable() == threaded.to_jsonable()

    def test_failure_cap(self):
        kg, samples, sc = eval_scenario()
        with pytest.raises(FailureCapExceeded):
            run_eval(samples, kg, sc.backends, TES_ONLY, failure_cap=0.1)

    def test_ignore_nil_mode(self):
        kg, samples, sc = eval_scenario(n_extra_fail=0)
        report = run_eval(samples, kg, sc.backends, TES_ONLY, nil_mode="ignore_nil", k_list=(1,))
        assert report.accuracies[1] == 0.5  # nil sample excluded, fail sample absent

    def test_samples_must_have_gold(self):
        kg, samples, sc = eval_scenario()
        with pytest.raises(MissingGoldError):
            run_eval([MentionSample(mention="query")], kg, sc.backends, TES_ONLY)

    def test_empty_dataset_rejected(self):
        kg, _, sc = eval_scenario()
        with pytest.raises(EmptyEvalSetError):
            run_eval([], kg, sc.backends, TES_ONLY)


class TestAblation:
    def test_labels_and_fingerprints_distinct(self):
        kg, samples, sc = eval_scenario(n_extra_fail=0)
        # imageless data with the consistency gate off reduces every delta to
        # the same selector-only flow, so one transcript serves all four runs
        results = run_ablation(samples, kg, sc.backends, PipelineConfig(), ["bcd", "bc", "bd", "b"])
        labels = [label for label, _ in results]
        assert labels == ["w/o bcd", "w/o bc", "w/o bd", "w/o b"]
        fingerprints = {report.config_fingerprint for _, report in results}
        assert len(fingerprints) == 4
        tokens = {report.delta_token for _, report in results}
        assert tokens == {"bcd", "bc", "bd", "b"}

    def test_duplicate_delta_rejected(self):
        kg, samples, sc = eval_scenario(n_extra_fail=0)
        with pytest.raises(ValueError):
            run_ablation(samples, kg, sc.backends, PipelineConfig(), ["bcd", "bcd"])

    def test_wo_bcd_equals_tes_only_run(self):
        kg, samples, sc = eval_scenario(n_extra_fail=0)
        [(label, ablated)] = run_ablation(samples, kg, sc.backends, PipelineConfig(), ["bcd"])
        direct = run_eval(samples, kg, sc.backends, TES_ONLY, label=label, delta_token="bcd")
        assert ablated.to_jsonable() == direct.to_jsonable()


def test_format_table_and_repeats():
    kg, samples, sc = eval_scenario(n_extra_fail=0)
    report = run_eval(samples, kg, sc.backends, TES_ONLY, k_list=(1, 3))
    text = format_report_table([report])
    assert "Top-1" in text and "full" in text and "not comparable" in text
    stats = summarize_repeats([report, report])
    assert stats["per_k"]["1"]["stddev"] == 0.0
    assert stats["per_k"]["1"]["mean"] == report.accuracies[1]
