"""Close-match suggestions for misspelled config keys and option values."""

import heapq
import re
from difflib import SequenceMatcher
from typing import Iterable, List, Optional, Tuple

_separator_regex = re.compile(r"[\W_]+")


def ratio(a: str, b: str) -> int:
    return int(round(100 * SequenceMatcher(None, a, b).ratio()))


def token_ratio(a: str, b: str) -> int:
    # "rate_learning" should still find "learning_rate"
    def tokens(s):
        return " ".join(sorted(_separator_regex.sub(" ", s).lower().split()))

    return max(ratio(a.lower(), b.lower()), ratio(tokens(a), tokens(b)))


def extract(query: str, choices: Iterable[str], *, score_cutoff: int = 0, limit: int = 3) -> List[Tuple[str, int]]:
    scored = ((choice, token_ratio(query, choice)) for choice in choices)
    scored = (pair for pair in scored if pair[1] >= score_cutoff)
    return heapq.nlargest(limit, scored, key=lambda t: t[1])


def extract_one(query: str, choices: Iterable[str], *, score_cutoff: int = 60) -> Optional[str]:
    matches = extract(query, choices, score_cutoff=score_cutoff, limit=1)
    return matches[0][0] if matches else None


def did_you_mean(query: str, choices: Iterable[str]) -> str:
    match = extract_one(query, choices)
    return f" Did you mean {match!r}?" if match else ""
