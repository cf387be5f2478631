from .index import (
    BM25Params,
    RetrievalHit,
    RetrievalIndex,
    add_pair,
    bm25_score,
    build_index,
    search_topk,
)
from .persist import IndexFormatError, load_index, read_manifest, save_index

__all__ = [
    "BM25Params",
    "IndexFormatError",
    "RetrievalHit",
    "RetrievalIndex",
    "add_pair",
    "bm25_score",
    "build_index",
    "load_index",
    "read_manifest",
    "save_index",
    "search_topk",
]
