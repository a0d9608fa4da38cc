"""Independent reference implementations used to check the real ones.

Everything here is written the slow, obvious way (full DP table, full scan,
plain sort) and must stay decoupled from the library's fast paths.
"""


def dp_levenshtein(a: str, b: str) -> int:
    """Classic two-row Wagner-Fischer table."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _norm(s: str) -> str:
    return " ".join(s.casefold().split())


def _score(a: str, b: str) -> int:
    if not a and not b:
        return 100
    longest = max(len(a), len(b))
    value = 100.0 * (1.0 - dp_levenshtein(a, b) / longest)
    return int(value + 0.5)


def oracle_base_ratio(a: str, b: str) -> int:
    return _score(_norm(a), _norm(b))


def oracle_token_sort_ratio(a: str, b: str) -> int:
    return _score(
        " ".join(sorted(_norm(a).split())),
        " ".join(sorted(_norm(b).split())),
    )


def oracle_token_set_ratio(a: str, b: str) -> int:
    sa, sb = set(_norm(a).split()), set(_norm(b).split())
    inter = " ".join(sorted(sa & sb))
    x = _norm(inter + " " + " ".join(sorted(sa - sb)))
    y = _norm(inter + " " + " ".join(sorted(sb - sa)))
    return max(_score(inter, x), _score(inter, y), _score(x, y))


def oracle_lexical_score(mention: str, name: str, aliases=()) -> int:
    best = 0
    for variant in (name, *aliases):
        for fn in (oracle_base_ratio, oracle_token_sort_ratio, oracle_token_set_ratio):
            best = max(best, fn(mention, variant))
    return best


def oracle_topk(mention: str, entities, k: int):
    """Full scan, full sort; entities are (id, name, aliases) triples."""
    scored = [(eid, oracle_lexical_score(mention, name, aliases)) for eid, name, aliases in entities]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
