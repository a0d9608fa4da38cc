import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from i2cr.fuzzy import (
    base_ratio,
    composite_ratio,
    levenshtein,
    normalize,
    token_set_ratio,
    token_sort_ratio,
)
from oracles import (
    dp_levenshtein,
    oracle_base_ratio,
    oracle_token_set_ratio,
    oracle_token_sort_ratio,
)

words = st.text(alphabet="abcdefg éß", min_size=0, max_size=24)


def test_normalize_collapses_whitespace():
    assert normalize("  New\t YORK  city ") == "new york city"
    assert normalize("") == ""
    assert normalize(" \t\n") == ""


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ("kitten", "sitting", 3),
        ("", "abc", 3),
        ("abc", "", 3),
        ("", "", 0),
        ("same", "same", 0),
        ("flaw", "lawn", 2),
    ],
)
def test_levenshtein_known_pairs(a, b, expected):
    assert levenshtein(a, b) == expected
    assert dp_levenshtein(a, b) == expected


@given(words, words)
def test_levenshtein_matches_dp(a, b):
    assert levenshtein(a, b) == dp_levenshtein(a, b)


def test_levenshtein_long_pattern():
    # patterns past 64 chars exercise the multi-word bit masks
    a = "x" * 150 + "abc"
    b = "x" * 150 + "abd"
    assert levenshtein(a, b) == dp_levenshtein(a, b) == 1


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ("Paris", "paris", 100),
        ("kitten", "sitting", 57),
        ("", "abc", 0),
        ("", "", 100),
    ],
)
def test_base_ratio_examples(a, b, expected):
    assert base_ratio(a, b) == expected


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ("new york", "york new", 100),
        ("a b", "a c", 67),
        ("world hello", "hello world!", 92),
    ],
)
def test_token_sort_examples(a, b, expected):
    assert token_sort_ratio(a, b) == expected


def test_token_sort_equals_base_when_sorted():
    assert token_sort_ratio("a b", "a c") == base_ratio("a b", "a c")


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ("barack obama", "obama", 100),
        ("identical strings", "identical strings", 100),
        ("alpha beta gamma", "beta delta", 40),
    ],
)
def test_token_set_examples(a, b, expected):
    assert token_set_ratio(a, b) == expected


@given(words, words)
def test_scorers_match_oracle(a, b):
    assert base_ratio(a, b) == oracle_base_ratio(a, b)
    assert token_sort_ratio(a, b) == oracle_token_sort_ratio(a, b)
    assert token_set_ratio(a, b) == oracle_token_set_ratio(a, b)


@given(words, words)
def test_symmetry_and_range(a, b):
    for fn in (base_ratio, token_sort_ratio, token_set_ratio, composite_ratio):
        score = fn(a, b)
        assert fn(b, a) == score
        assert 0 <= score <= 100


@given(st.lists(st.text(alphabet="abcde", min_size=1, max_size=6), min_size=1, max_size=5), st.randoms())
def test_token_sort_permutation_invariant(tokens, rnd):
    a = " ".join(tokens)
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    b = " ".join(shuffled)
    assert token_sort_ratio(a, b) == 100
    assert token_sort_ratio(a, "zq zz") == token_sort_ratio(b, "zq zz")


@given(
    st.sets(st.text(alphabet="abcde", min_size=1, max_size=6), min_size=1, max_size=5),
    st.sets(st.text(alphabet="abcde", min_size=1, max_size=6), min_size=0, max_size=3),
)
@settings(max_examples=60)
def test_token_set_containment_scores_100(base_tokens, extra_tokens):
    smaller = " ".join(sorted(base_tokens))
    larger = " ".join(sorted(base_tokens | extra_tokens))
    assert token_set_ratio(smaller, larger) == 100


def test_composite_is_max_of_parts():
    a, b = "alpha beta gamma", "beta delta"
    assert composite_ratio(a, b) == max(
        base_ratio(a, b), token_sort_ratio(a, b), token_set_ratio(a, b)
    )
