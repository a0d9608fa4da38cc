"""Lexical similarity scoring for candidate retrieval.

All scores are integers in [0, 100]. Inputs are normalized first: case-folded,
runs of whitespace collapsed to single spaces, leading/trailing whitespace
stripped. Punctuation is kept as-is.
"""

from collections import defaultdict

__all__ = [
    "normalize",
    "levenshtein",
    "base_ratio",
    "token_sort_ratio",
    "token_set_ratio",
    "composite_ratio",
]


def normalize(s: str) -> str:
    """Case-fold and collapse internal whitespace; strip the ends."""
    return " ".join(s.casefold().split())


def levenshtein(a: str, b: str) -> int:
    """Exact edit distance (unit-cost insert/delete/substitute).

    Uses a bit-parallel scan over the pattern; Python's big ints make it
    correct for any pattern length, and it is several times faster than a
    plain DP table at the string lengths retrieval sees.
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) > len(b):
        a, b = b, a

    m = len(a)
    full = (1 << m) - 1
    last = 1 << (m - 1)
    peq: dict[str, int] = defaultdict(int)
    for i, ch in enumerate(a):
        peq[ch] |= 1 << i

    vp = full
    vn = 0
    dist = m
    for ch in b:
        x = peq[ch] | vn
        d0 = ((((x & vp) + vp) ^ vp) | x) & full
        hp = vn | (full ^ (d0 | vp))
        hn = d0 & vp
        if hp & last:
            dist += 1
        elif hn & last:
            dist -= 1
        hp = ((hp << 1) | 1) & full
        hn = (hn << 1) & full
        vp = hn | (full ^ (d0 | hp))
        vn = hp & d0
    return dist


def _round_half_up(x: float) -> int:
    # ties round up; round() would round half-to-even
    return int(x + 0.5)


def _ratio_normalized(a: str, b: str) -> int:
    if a == b:
        return 100
    longest = max(len(a), len(b))
    if longest == 0:
        return 100
    return _round_half_up(100.0 * (1.0 - levenshtein(a, b) / longest))


def base_ratio(a: str, b: str) -> int:
    """Normalized edit similarity of the two strings, 0..100.

    Defined as round(100 * (1 - distance / max_length)) over the normalized
    inputs; 100 when both normalize to the empty string.
    """
    return _ratio_normalized(normalize(a), normalize(b))


def token_sort_ratio(a: str, b: str) -> int:
    """base_ratio after sorting each side's whitespace-separated tokens."""
    return _ratio_normalized(
        " ".join(sorted(a.casefold().split())),
        " ".join(sorted(b.casefold().split())),
    )


def token_set_ratio(a: str, b: str) -> int:
    """Best of three comparisons built from shared and unshared tokens.

    With I the sorted shared tokens, X = I plus a's extra tokens, and
    Y = I plus b's extra tokens, returns max of base_ratio over (I, X),
    (I, Y), (X, Y). Equals 100 whenever one token set contains the other.
    """
    sa = set(a.casefold().split())
    sb = set(b.casefold().split())
    inter = " ".join(sorted(sa & sb))
    only_a = " ".join(sorted(sa - sb))
    only_b = " ".join(sorted(sb - sa))
    x = f"{inter} {only_a}".strip()
    y = f"{inter} {only_b}".strip()
    return max(
        _ratio_normalized(inter, x),
        _ratio_normalized(inter, y),
        _ratio_normalized(x, y),
    )


def composite_ratio(a: str, b: str) -> int:
    """Max of the base, token-sort, and token-set ratios."""
    best = base_ratio(a, b)
    if best == 100:
        return best
    best = max(best, token_sort_ratio(a, b))
    if best == 100:
        return best
    return max(best, token_set_ratio(a, b))
