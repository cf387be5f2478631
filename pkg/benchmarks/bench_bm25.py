"""Compare the numba and numpy BM25 kernels on one large random index.

    python benchmarks/bench_bm25.py --docs 200000 --queries 500

Both kernel sets run on the same compiled postings; scores and top-k ids
are checked for equality before timings are printed. Numba compile time is
excluded by a warm-up query.
"""
import argparse
import sys
import time

import numpy as np

from ragmt.corpus import BilingualPair, Domain, LanguagePair
from ragmt.retrieval import build_index, kernels


def make_index(n_docs: int, vocab: int, seed: int):
    rng = np.random.default_rng(seed)
    # Zipf-ish term draw so some posting lists are long
    weights = 1.0 / np.arange(1, vocab + 1)
    weights /= weights.sum()
    lengths = rng.integers(4, 30, n_docs)
    terms = rng.choice(vocab, size=int(lengths.sum()), p=weights)
    lang = LanguagePair("en", "de")
    pairs, pos = [], 0
    for i, n in enumerate(lengths):
        text = " ".join(f"w{t}" for t in terms[pos:pos + n])
        pos += n
        pairs.append(BilingualPair(i, text, text, Domain.TTL, lang))
    return build_index(pairs), weights, rng


def run(index, queries, k, accumulate, topk):
    frozen = index._compiled()
    k1, b, avgdl = index.params.k1, index.params.b, index.avg_doc_len
    out = []
    for q in queries:
        scores = np.zeros(index.n_docs)
        for term in dict.fromkeys(q):
            slot = frozen.slots.get(term)
            if slot is None:
                continue
            lo, hi = slot
            accumulate(scores, frozen.doc_ids[lo:hi], frozen.tfs[lo:hi], index.idf(term), frozen.doc_len, k1, b, avgdl)
        out.append((topk(scores, k), scores))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--docs", type=int, default=200_000)
    ap.add_argument("--vocab", type=int, default=50_000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not kernels.HAS_NUMBA:
        sys.exit("numba is not installed; pip install 'artifact[fast]'")

    t0 = time.perf_counter()
    index, weights, rng = make_index(args.docs, args.vocab, args.seed)
    index._compiled()
    print(f"index: {index.n_docs} docs, {index.vocabulary_size} terms, built in {time.perf_counter() - t0:.1f}s")
    queries = [[f"w{t}" for t in rng.choice(args.vocab, size=rng.integers(3, 12), p=weights)]
               for _ in range(args.queries)]

    impls = {"numpy": (kernels.accumulate_numpy, kernels.topk_numpy),
             "numba": (kernels.accumulate_numba, kernels.topk_numba)}
    run(index, queries[:1], args.k, *impls["numba"])  # jit warm-up
    timings, results = {}, {}
    for name, (acc, top) in impls.items():
        t0 = time.perf_counter()
        results[name] = run(index, queries, args.k, acc, top)
        timings[name] = time.perf_counter() - t0

    for (ids_a, sc_a), (ids_b, sc_b) in zip(results["numpy"], results["numba"]):
        if not (np.array_equal(ids_a, ids_b) and np.array_equal(sc_a, sc_b)):
            sys.exit("kernel outputs differ")
    for name, t in timings.items():
        print(f"{name:6s} {t:8.3f}s  {1000 * t / len(queries):7.3f} ms/query")
    print(f"speedup numba/numpy: {timings['numpy'] / timings['numba']:.2f}x (outputs identical)")


if __name__ == "__main__":
    main()
