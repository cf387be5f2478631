"""chrF at sentence and corpus level, and retrieved-example similarity.

Plain character n-gram F-score (no word n-grams). For each order
n = 1..max_n, precision and recall come from the clipped intersection of
hypothesis and reference n-gram multisets. Precisions are averaged over the
orders where the hypothesis has n-grams, recalls over the orders where the
reference has them; orders too long for both strings drop out instead of
counting as zero. Two empty strings score 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .textproc import char_ngrams, strip_whitespace

AVERAGING = ("micro", "sentence")


@dataclass(frozen=True)
class ChrfParams:
    max_n: int = 6
    beta: float = 2.0
    strip_ws: bool = True

    def __post_init__(self):
        if self.max_n < 1:
            raise ValueError(f"max_n must be >= 1, got {self.max_n}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")

    def to_json(self) -> dict:
        return {"max_n": self.max_n, "beta": self.beta, "strip_ws": self.strip_ws}


@dataclass
class ChrfStats:
    """Per-order matched / hypothesis / reference n-gram counts."""

    matched: list[int] = field(default_factory=list)
    hyp_total: list[int] = field(default_factory=list)
    ref_total: list[int] = field(default_factory=list)

    @classmethod
    def zeros(cls, max_n: int) -> "ChrfStats":
        return cls([0] * max_n, [0] * max_n, [0] * max_n)

    def __iadd__(self, other: "ChrfStats") -> "ChrfStats":
        for i in range(len(self.matched)):
            self.matched[i] += other.matched[i]
            self.hyp_total[i] += other.hyp_total[i]
            self.ref_total[i] += other.ref_total[i]
        return self


def chrf_stats(hyp: str, ref: str, params: ChrfParams = ChrfParams()) -> ChrfStats:
    if params.strip_ws:
        hyp, ref = strip_whitespace(hyp), strip_whitespace(ref)
    stats = ChrfStats.zeros(params.max_n)
    for i, n in enumerate(range(1, params.max_n + 1)):
        if len(hyp) < n and len(ref) < n:
            continue
        h = char_ngrams(hyp, n, strip_ws=False)
        r = char_ngrams(ref, n, strip_ws=False)
        # Counter & is the clipped (min-count) intersection
        stats.matched[i] = sum((h & r).values())
        stats.hyp_total[i] = max(0, len(hyp) - n + 1)
        stats.ref_total[i] = max(0, len(ref) - n + 1)
    return stats


def chrf_from_stats(stats: ChrfStats, beta: float = 2.0) -> float:
    precisions = [m / h for m, h in zip(stats.matched, stats.hyp_total) if h > 0]
    recalls = [m / r for m, r in zip(stats.matched, stats.ref_total) if r > 0]
    p = sum(precisions) / len(precisions) if precisions else 0.0
    r = sum(recalls) / len(recalls) if recalls else 0.0
    if p + r == 0.0:
        return 0.0
    b2 = beta * beta
    return 100.0 * (1.0 + b2) * p * r / (b2 * p + r)


def chrf_sentence(hyp: str, ref: str, params: ChrfParams = ChrfParams()) -> float:
    """chrF of one hypothesis against one reference, in [0, 100]."""
    return chrf_from_stats(chrf_stats(hyp, ref, params), params.beta)


def chrf_corpus(pairs: Iterable[tuple[str, str]], params: ChrfParams = ChrfParams(), average: str = "micro") -> float:
    """Corpus chrF over ``(hyp, ref)`` pairs.

    ``average="micro"`` sums n-gram statistics over all segments before
    computing the F-score; ``"sentence"`` is the plain mean of sentence
    scores, kept for sensitivity checks.
    """
    if average not in AVERAGING:
        raise ValueError(f"average must be one of {AVERAGING}, got {average!r}")
    pairs = list(pairs)
    if not pairs:
        raise ValueError("chrf_corpus needs at least one segment")
    if average == "sentence":
        return sum(chrf_sentence(h, r, params) for h, r in pairs) / len(pairs)
    total = ChrfStats.zeros(params.max_n)
    for hyp, ref in pairs:
        total += chrf_stats(hyp, ref, params)
    return chrf_from_stats(total, params.beta)


def example_similarity(test_src: str, example_srcs: Sequence[str], params: ChrfParams = ChrfParams()) -> float:
    """Mean chrF of each few-shot example source against the test source."""
    if not example_srcs:
        raise ValueError("example_similarity needs at least one example")
    return sum(chrf_sentence(ex, test_src, params) for ex in example_srcs) / len(example_srcs)
