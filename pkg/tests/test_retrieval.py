import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from i2cr.kg import EntityRecord, KgSnapshot
from i2cr.retrieval import CandidateSet, Candidate, lexical_score, retrieve_topk
from oracles import oracle_lexical_score, oracle_topk


def entity(eid, name, aliases=()):
    return EntityRecord(id=eid, name=name, aliases=tuple(aliases))


def random_phrase(rnd, max_tokens=3, alphabet="abcdefg"):
    return " ".join(
        "".join(rnd.choices(alphabet, k=rnd.randint(1, 8)))
        for _ in range(rnd.randint(1, max_tokens))
    )


def random_kg(rnd, n):
    records = []
    for i in range(n):
        aliases = tuple(random_phrase(rnd) for _ in range(rnd.randint(0, 2)))
        records.append(entity(f"e{i:04d}", random_phrase(rnd), aliases))
    return KgSnapshot(records)


def test_exact_name_match_scores_100():
    assert lexical_score("Paris", entity("e1", "paris")) == 100


def test_alias_branch_dominates():
    rec = entity("e1", "completely unrelated xyz", aliases=("The Big Apple",))
    assert lexical_score("big apple", rec) == 100


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_lexical_score_matches_exhaustive_oracle(data):
    rnd = random.Random(data.draw(st.integers(0, 2**32)))
    mention = random_phrase(rnd)
    rec = entity("e1", random_phrase(rnd), tuple(random_phrase(rnd) for _ in range(rnd.randint(0, 3))))
    assert lexical_score(mention, rec) == oracle_lexical_score(mention, rec.name, rec.aliases)


def test_topk_exact_mention_first():
    kg = KgSnapshot([entity("e2", "zzz qqq"), entity("e1", "target name")])
    result = retrieve_topk("target name", kg, 1)
    assert result.entries[0] == Candidate("e1", 100)


def test_topk_short_kg_yields_short_set():
    kg = random_kg(random.Random(5), 3)
    assert len(retrieve_topk("whatever", kg, 10).entries) == 3


def test_topk_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        retrieve_topk("m", random_kg(random.Random(0), 2), 0)


def test_topk_tie_break_ascending_id():
    kg = KgSnapshot([entity("b", "same name"), entity("a", "same name"), entity("c", "other")])
    ids = retrieve_topk("same name", kg, 2).ids()
    assert ids == ("a", "b")


@given(st.integers(0, 2**32), st.integers(1, 60), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_topk_equals_full_scan_oracle(seed, n, k):
    rnd = random.Random(seed)
    kg = random_kg(rnd, n)
    mention = random_phrase(rnd)
    got = retrieve_topk(mention, kg, k)
    expected = oracle_topk(mention, [(r.id, r.name, r.aliases) for r in kg], k)
    assert [(c.entity_id, c.score) for c in got.entries] == expected


def test_topk_deterministic_and_cached():
    rnd = random.Random(11)
    kg = random_kg(rnd, 40)
    first = retrieve_topk("abc def", kg, 5)
    second = retrieve_topk("abc def", kg, 5)
    assert first == second
    assert second is first  # memoized per snapshot


def test_empty_mention_scores_everything_100():
    # the empty token set is contained in every token set
    kg = KgSnapshot([entity("a", "anything"), entity("b", "else")])
    result = retrieve_topk("", kg, 2)
    assert [c.score for c in result.entries] == [100, 100]
    assert result.ids() == ("a", "b")


def test_candidate_set_validates_order():
    with pytest.raises(ValueError):
        CandidateSet(query="m", k=3, entries=(Candidate("a", 10), Candidate("b", 90)))
    with pytest.raises(ValueError):
        CandidateSet(query="m", k=1, entries=(Candidate("a", 90), Candidate("b", 10)))
