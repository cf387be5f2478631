"""Text normalization, word tokenization for indexing, character n-grams for chrF.

The tokenizer is versioned: an index records ``TOKENIZER_VERSION`` and refuses
to load if it differs, so index-time and query-time tokenization always agree.
"""
from __future__ import annotations

import unicodedata
from collections import Counter
from functools import lru_cache

TOKENIZER_VERSION = 1


@lru_cache(maxsize=65536)
def _is_word_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "LN"


def normalize(text: str) -> str:
    """NFC-compose so precomposed and decomposed accents tokenize the same."""
    return unicodedata.normalize("NFC", text)


def tokenize(text: str) -> list[str]:
    """Split ``text`` into lowercase alphanumeric tokens.

    A token is a maximal run of characters in Unicode categories L* or N*;
    everything else separates tokens. Tokens are case folded. No stemming
    and no stopword removal: brand names and part numbers are the signal.

    >>> tokenize("KYB Shock Absorber, Part Number: 343441")
    ['kyb', 'shock', 'absorber', 'part', 'number', '343441']
    """
    tokens = []
    start = -1
    text = normalize(text)
    for i, ch in enumerate(text):
        if _is_word_char(ch):
            if start < 0:
                start = i
        elif start >= 0:
            tokens.append(text[start:i].casefold())
            start = -1
    if start >= 0:
        tokens.append(text[start:].casefold())
    # casefold can expand a char into a sequence containing non-word chars
    # (e.g. U+0130 -> "i" + combining dot); re-split to keep the invariant
    if any(not _is_word_char(c) for tok in tokens for c in tok):
        return [t for tok in tokens for t in _resplit(tok)]
    return tokens


def _resplit(token: str) -> list[str]:
    out, cur = [], []
    for ch in token:
        if _is_word_char(ch):
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def strip_whitespace(text: str) -> str:
    return "".join(ch for ch in text if not ch.isspace())


def char_ngrams(text: str, n: int, strip_ws: bool = True) -> Counter:
    """Multiset of character n-grams of ``text``.

    With ``strip_ws`` all Unicode whitespace is removed before sliding the
    window, so ``"a b"`` and ``"ab"`` have the same n-grams.
    """
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    if strip_ws:
        text = strip_whitespace(text)
    return Counter(text[i:i + n] for i in range(len(text) - n + 1))
