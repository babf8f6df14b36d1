"""Built-in vocabulary for publication titles and abstracts."""

import random

POOL_SIZE = 5000

_ONSETS = ("b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "cl", "dr", "fr", "gr", "pl", "st", "tr")
_VOWELS = ("a", "e", "i", "o", "u", "ea", "io", "ou")
_CODAS = ("", "", "n", "r", "s", "l", "m", "x", "nd", "st")


def _build_pool() -> tuple[str, ...]:
    # Fixed internal seed: the pool is part of the format, not a parameter.
    rng = random.Random(20220101)
    seen: dict[str, None] = {}
    while len(seen) < POOL_SIZE:
        n = rng.choice((2, 2, 3))
        word = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(n)) + rng.choice(_CODAS)
        if len(word) >= 5:
            seen.setdefault(word)
    return tuple(seen)


WORDS: tuple[str, ...] = _build_pool()
WORD_SET: frozenset[str] = frozenset(WORDS)
