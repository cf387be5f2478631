"""Inverted index with Okapi BM25 scoring over the source side of bilingual pairs.

Scoring, for query terms ``t`` taken once each::

    score(q, d) = sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))

The ``+1`` inside the log keeps idf non-negative for every ``df <= N``.
Ties are broken by ascending internal doc id (insertion order).
"""
from __future__ import annotations

import math
import threading
from array import array
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..corpus import BilingualPair, Domain, LanguagePair
from ..textproc import tokenize
from . import kernels


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0 or not 0.0 <= self.b <= 1.0:
            raise ValueError(f"invalid BM25 parameters k1={self.k1}, b={self.b}")


@dataclass(frozen=True)
class RetrievalHit:
    pair: BilingualPair
    score: float
    rank: int
    doc_id: int


@dataclass(frozen=True)
class _Frozen:
    slots: dict  # term -> (start, stop) into doc_ids/tfs
    doc_ids: np.ndarray
    tfs: np.ndarray
    doc_len: np.ndarray


class RetrievalIndex:
    """BM25 index for one (language pair, domain).

    Single writer, many readers: :meth:`add` needs exclusive access, after
    which any number of threads may call :meth:`search` concurrently. Posting
    lists are kept in growable arrays and compiled to contiguous numpy
    buffers on first search after a write.
    """

    def __init__(self, lang: "LanguagePair | str", domain: "Domain | str | None" = None, params: BM25Params | None = None):
        self.lang = LanguagePair.parse(lang)
        self.domain = Domain.parse(domain) if domain is not None else None
        self.params = params or BM25Params()
        self.store: list[BilingualPair] = []
        self._postings: dict[str, tuple[array, array]] = {}
        self._doc_len = array("q")
        self._total_len = 0
        self._pair_docs: dict[int, int] = {}
        self._frozen: _Frozen | None = None
        self._lock = threading.Lock()

    # -- statistics -----------------------------------------------------
    @property
    def n_docs(self) -> int:
        return len(self.store)

    @property
    def total_len(self) -> int:
        return self._total_len

    @property
    def avg_doc_len(self) -> float:
        return self._total_len / len(self.store) if self.store else 0.0

    @property
    def doc_len(self) -> dict[int, int]:
        return dict(enumerate(self._doc_len))

    @property
    def postings(self) -> dict[str, list[tuple[int, int]]]:
        return {t: list(zip(d, f)) for t, (d, f) in self._postings.items()}

    @property
    def vocabulary_size(self) -> int:
        return len(self._postings)

    def df(self, term: str) -> int:
        entry = self._postings.get(term)
        return len(entry[0]) if entry else 0

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def doc_id_of(self, pair_id: int) -> int:
        """Internal doc id of the first indexed pair with ``pair_id``."""
        return self._pair_docs[pair_id]

    # -- writes ---------------------------------------------------------
    def add(self, pair: BilingualPair) -> int:
        if pair.lang != self.lang:
            raise ValueError(f"pair {pair.id} is {pair.lang}, index is {self.lang}")
        tokens = tokenize(pair.src_text)
        doc_id = len(self.store)
        for term, tf in Counter(tokens).items():
            entry = self._postings.get(term)
            if entry is None:
                entry = self._postings[term] = (array("q"), array("q"))
            entry[0].append(doc_id)
            entry[1].append(tf)
        self._doc_len.append(len(tokens))
        self._total_len += len(tokens)
        self.store.append(pair)
        self._pair_docs.setdefault(pair.id, doc_id)
        self._frozen = None
        return doc_id

    # -- reads ----------------------------------------------------------
    def _compiled(self) -> _Frozen:
        frozen = self._frozen
        if frozen is not None:
            return frozen
        with self._lock:
            if self._frozen is None:
                self._frozen = self._compile()
            return self._frozen

    def _compile(self) -> _Frozen:
        slots, start = {}, 0
        for term, (docs, _) in self._postings.items():
            slots[term] = (start, start + len(docs))
            start += len(docs)
        doc_ids = np.empty(start, dtype=np.int64)
        tfs = np.empty(start, dtype=np.int64)
        for term, (docs, freqs) in self._postings.items():
            lo, hi = slots[term]
            doc_ids[lo:hi] = docs
            tfs[lo:hi] = freqs
        return _Frozen(slots, doc_ids, tfs, np.asarray(self._doc_len, dtype=np.float64))

    def score_all(self, query: Sequence[str]) -> np.ndarray:
        """Dense BM25 scores of every document for pre-tokenized ``query``."""
        frozen = self._compiled()
        scores = np.zeros(self.n_docs, dtype=np.float64)
        k1, b, avgdl = self.params.k1, self.params.b, self.avg_doc_len
        for term in dict.fromkeys(query):
            slot = frozen.slots.get(term)
            if slot is None:
                continue
            lo, hi = slot
            kernels.accumulate(scores, frozen.doc_ids[lo:hi], frozen.tfs[lo:hi], self.idf(term),
                               frozen.doc_len, k1, b, avgdl)
        return scores

    def score(self, query: Sequence[str], doc_id: int) -> float:
        if not 0 <= doc_id < self.n_docs:
            raise KeyError(f"unknown doc id {doc_id}")
        frozen = self._compiled()
        k1, b, avgdl = self.params.k1, self.params.b, self.avg_doc_len
        dl = float(self._doc_len[doc_id])
        total = 0.0
        for term in dict.fromkeys(query):
            slot = frozen.slots.get(term)
            if slot is None:
                continue
            docs = frozen.doc_ids[slot[0]:slot[1]]
            pos = int(np.searchsorted(docs, doc_id))
            if pos == len(docs) or docs[pos] != doc_id:
                continue
            tf = float(frozen.tfs[slot[0] + pos])
            norm = k1 * (1.0 - b + b * dl / avgdl)
            total += self.idf(term) * (tf * (k1 + 1.0)) / (tf + norm)
        return total

    def search(self, query_text: str, k: int, exclude: Iterable[int] = ()) -> list[RetrievalHit]:
        """Top-``k`` documents with positive score, by (score desc, doc id asc).

        ``exclude`` lists internal doc ids that must not be returned.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not self.store:
            return []
        scores = self.score_all(tokenize(query_text))
        excluded = list(exclude)
        if excluded:
            scores[excluded] = 0.0
        top = kernels.topk(scores, k)
        return [RetrievalHit(self.store[d], float(scores[d]), rank, int(d)) for rank, d in enumerate(top)]

    def __repr__(self) -> str:
        domain = self.domain.label if self.domain else "-"
        return f"RetrievalIndex({self.lang}, {domain}, n_docs={self.n_docs}, terms={len(self._postings)})"


def build_index(pairs: Iterable[BilingualPair], params: BM25Params | None = None, *,
                lang: "LanguagePair | str | None" = None, domain: "Domain | str | None" = None) -> RetrievalIndex:
    """Index the source texts of ``pairs`` in order.

    ``lang`` defaults to the pairs' language; ``domain`` defaults to the
    pairs' shared domain, or TBD when they span several.
    """
    pairs = list(pairs)
    langs = {p.lang for p in pairs}
    if len(langs) > 1:
        raise ValueError(f"mixed language pairs: {sorted(map(str, langs))}")
    if lang is None:
        if not pairs:
            raise ValueError("lang is required to build an empty index")
        lang = pairs[0].lang
    if domain is None and pairs:
        domains = {p.domain for p in pairs}
        domain = domains.pop() if len(domains) == 1 else Domain.TBD
    index = RetrievalIndex(lang, domain, params)
    for pair in pairs:
        index.add(pair)
    return index


def add_pair(index: RetrievalIndex, pair: BilingualPair) -> RetrievalIndex:
    index.add(pair)
    return index


def bm25_score(index: RetrievalIndex, query: "Sequence[str] | str", doc_id: int) -> float:
    if isinstance(query, str):
        query = tokenize(query)
    return index.score(query, doc_id)


def search_topk(index: RetrievalIndex, query_text: str, k: int, exclude: Iterable[int] = ()) -> list[RetrievalHit]:
    return index.search(query_text, k, exclude)
