"""BM25 hot loops.

Each kernel has a numba ``@njit`` version and a pure-numpy version with the
same floating-point operation order. The numba path is used when numba
imports and ``RAGMT_DISABLE_NUMBA`` is unset (or ``0``); set it to ``1`` to
force the numpy path. Both implementations stay importable so tests and the
benchmark can compare them directly.
"""
import os

import numpy as np

DISABLE_ENV = "RAGMT_DISABLE_NUMBA"
SMALL_K = 64  # above this the numba top-k sorts all candidates instead

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get(DISABLE_ENV, "").strip().lower() in ("", "0", "false", "no")


def accumulate_numpy(scores, doc_ids, tfs, idf, doc_len, k1, b, avgdl):
    """Add one query term's BM25 contribution to ``scores`` in place.

    ``doc_ids`` of a single posting list are unique, so fancy-index ``+=``
    is safe here.
    """
    tf = tfs.astype(np.float64)
    norm = k1 * (1.0 - b + b * doc_len[doc_ids] / avgdl)
    scores[doc_ids] += idf * (tf * (k1 + 1.0)) / (tf + norm)


def topk_numpy(scores, k):
    """Indices of the ``k`` largest positive scores, ties by ascending index."""
    cand = np.flatnonzero(scores > 0.0)
    if k < cand.size:
        vals = scores[cand]
        kth = np.partition(vals, cand.size - k)[cand.size - k]
        # keeps every tie at the threshold; cand stays in ascending id order
        cand = cand[vals >= kth]
    # stable sort on -score keeps ascending doc id within ties
    order = np.argsort(-scores[cand], kind="mergesort")
    return cand[order[:k]]


if HAS_NUMBA:

    @njit(cache=True)
    def accumulate_numba(scores, doc_ids, tfs, idf, doc_len, k1, b, avgdl):
        for i in range(doc_ids.shape[0]):
            d = doc_ids[i]
            tf = np.float64(tfs[i])
            norm = k1 * (1.0 - b + b * doc_len[d] / avgdl)
            scores[d] += idf * (tf * (k1 + 1.0)) / (tf + norm)

    @njit(cache=True)
    def _topk_sorted_numba(scores, k):
        n_pos = 0
        for i in range(scores.shape[0]):
            if scores[i] > 0.0:
                n_pos += 1
        cand = np.empty(n_pos, dtype=np.int64)
        j = 0
        for i in range(scores.shape[0]):
            if scores[i] > 0.0:
                cand[j] = i
                j += 1
        order = np.argsort(-scores[cand], kind="mergesort")
        m = min(k, n_pos)
        out = np.empty(m, dtype=np.int64)
        for i in range(m):
            out[i] = cand[order[i]]
        return out

    @njit(cache=True)
    def topk_numba(scores, k):
        if k > SMALL_K:
            return _topk_sorted_numba(scores, k)
        # one pass with a bounded insertion list; ids arrive ascending, so an
        # equal score never displaces an earlier id
        ids = np.empty(k, dtype=np.int64)
        vals = np.empty(k, dtype=np.float64)
        m = 0
        for i in range(scores.shape[0]):
            s = scores[i]
            if s <= 0.0 or (m == k and s <= vals[m - 1]):
                continue
            j = m if m < k else k - 1
            while j > 0 and vals[j - 1] < s:
                vals[j] = vals[j - 1]
                ids[j] = ids[j - 1]
                j -= 1
            vals[j] = s
            ids[j] = i
            if m < k:
                m += 1
        return ids[:m].copy()

else:  # pragma: no cover
    accumulate_numba = accumulate_numpy
    topk_numba = topk_numpy


if USE_NUMBA:
    accumulate = accumulate_numba
    topk = topk_numba
else:
    accumulate = accumulate_numpy
    topk = topk_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
