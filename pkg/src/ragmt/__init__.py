"""Retrieval-augmented few-shot prompting for product title translation.

Bilingual product information is indexed with BM25; the top-k most similar
pairs become few-shot examples in an LLM translation prompt, and results are
scored with chrF.
"""
__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    BilingualPair,
    Corpus,
    Domain,
    LanguagePair,
    TestSegment,
    ingest_pairs,
    load_test_set,
    sample_random,
)
from .metrics import ChrfParams, chrf_corpus, chrf_sentence, example_similarity  # noqa: E402
from .retrieval import (  # noqa: E402
    BM25Params,
    RetrievalHit,
    RetrievalIndex,
    add_pair,
    bm25_score,
    build_index,
    load_index,
    save_index,
    search_topk,
)

__all__ = [
    "BM25Params",
    "BilingualPair",
    "ChrfParams",
    "Corpus",
    "Domain",
    "LanguagePair",
    "RetrievalHit",
    "RetrievalIndex",
    "TestSegment",
    "add_pair",
    "bm25_score",
    "build_index",
    "chrf_corpus",
    "chrf_sentence",
    "example_similarity",
    "ingest_pairs",
    "load_index",
    "load_test_set",
    "sample_random",
    "save_index",
    "search_topk",
]
