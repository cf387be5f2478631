import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ragmt.corpus import Domain, LanguagePair
from ragmt.retrieval import (BM25Params, IndexFormatError, RetrievalIndex, add_pair, bm25_score, build_index,
                             load_index, save_index, search_topk)
from ragmt.retrieval import kernels
from ragmt.textproc import tokenize
from conftest import EN_DE, make_pair
from oracles import brute_bm25, brute_topk

WORDS = ["red", "shoe", "mug", "case", "pink", "slim", "nokia", "kyb", "343441", "alu", "sign", "metal"]


def random_docs(rng, n_docs, max_len=12, vocab=WORDS):
    return [" ".join(rng.choice(vocab) for _ in range(rng.randint(1, max_len))) for _ in range(n_docs)]


def test_empty_index():
    index = build_index([], lang="en-de")
    assert index.n_docs == 0 and index.avg_doc_len == 0.0
    assert search_topk(index, "red shoe", 5) == []


def test_single_pair_postings():
    index = build_index([make_pair(0, "red shoe")])
    assert index.postings == {"red": [(0, 1)], "shoe": [(0, 1)]}
    assert index.avg_doc_len == 2
    assert index.doc_len == {0: 2}


def test_statistics_match_recount():
    rng = random.Random(5)
    texts = random_docs(rng, 10_000, vocab=WORDS + [f"w{i}" for i in range(300)])
    index = build_index([make_pair(i, t) for i, t in enumerate(texts)])
    toks = [tokenize(t) for t in texts]
    assert index.n_docs == len(index.store) == len(index.doc_len) == 10_000
    assert index.avg_doc_len == pytest.approx(sum(map(len, toks)) / len(toks), abs=1e-12)
    for term in ("red", "w7", "w299"):
        expected = [(i, d.count(term)) for i, d in enumerate(toks) if term in d]
        assert index.postings[term] == expected


def test_mixed_languages_rejected():
    pairs = [make_pair(0, "a"), make_pair(1, "b", lang=LanguagePair("en", "pl"))]
    with pytest.raises(ValueError, match="mixed"):
        build_index(pairs)
    index = build_index([make_pair(0, "a")])
    with pytest.raises(ValueError):
        add_pair(index, make_pair(1, "b", lang=LanguagePair("en", "pl")))


def test_domain_inferred():
    assert build_index([make_pair(0, "a", domain=Domain.BP)]).domain is Domain.BP
    mixed = [make_pair(0, "a", domain=Domain.BP), make_pair(1, "b", domain=Domain.PD)]
    assert build_index(mixed).domain is Domain.TBD


def test_add_to_empty_equals_build():
    pair = make_pair(0, "red shoe")
    a = add_pair(RetrievalIndex(EN_DE), pair)
    b = build_index([pair])
    assert a.postings == b.postings and a.doc_len == b.doc_len
    assert search_topk(a, "shoe", 3) == search_topk(b, "shoe", 3)


def test_add_duplicate_text():
    index = build_index([make_pair(0, "red shoe")])
    add_pair(index, make_pair(1, "red shoe"))
    assert index.n_docs == 2
    assert [h.pair.id for h in search_topk(index, "red shoe", 5)] == [0, 1]


def test_score_zero_without_overlap():
    index = build_index([make_pair(0, "red shoe"), make_pair(1, "blue mug")])
    assert bm25_score(index, ["green"], 0) == 0.0
    assert bm25_score(index, "blue", 0) == 0.0


def test_score_single_doc_hand_value():
    # N=1, df=1, tf=1, dl=avgdl: idf = ln(1 + 0.5/1.5), tf part = 1
    index = build_index([make_pair(0, "red")])
    assert bm25_score(index, ["red"], 0) == pytest.approx(math.log(4 / 3), abs=1e-15)
    assert math.log(4 / 3) == pytest.approx(0.28768207245178085, abs=1e-15)


def test_score_unknown_doc():
    index = build_index([make_pair(0, "red")])
    with pytest.raises(KeyError):
        bm25_score(index, ["red"], 3)


def test_five_doc_toy_against_oracle():
    texts = ["red shoe", "red red mug", "pink slim case", "shoe case case", "metal sign"]
    index = build_index([make_pair(i, t) for i, t in enumerate(texts)])
    docs = [tokenize(t) for t in texts]
    expected = brute_bm25(docs, ["red", "case"])
    for i in range(5):
        assert bm25_score(index, ["red", "case"], i) == pytest.approx(expected[i], abs=1e-9)
    assert np.allclose(index.score_all(["red", "case"]), expected, atol=1e-9, rtol=0)


def test_duplicate_query_terms_count_once():
    index = build_index([make_pair(0, "red shoe"), make_pair(1, "mug")])
    assert bm25_score(index, ["red", "red"], 0) == bm25_score(index, ["red"], 0)


def test_exact_duplicate_ranks_first():
    rng = random.Random(11)
    vocab = WORDS + [f"w{i}" for i in range(30)]
    texts = sorted({" ".join(sorted(rng.sample(vocab, rng.randint(2, 6)))) for _ in range(60)})
    query = texts[17]
    index = build_index([make_pair(i, t) for i, t in enumerate(texts)])
    hits = search_topk(index, query, 3)
    brute = brute_bm25([tokenize(t) for t in texts], tokenize(query))
    assert hits[0].doc_id == 17
    assert hits[0].score == pytest.approx(max(brute), abs=1e-9)
    assert brute.index(max(brute)) == 17


def test_k_larger_than_corpus():
    index = build_index([make_pair(0, "red shoe"), make_pair(1, "mug"), make_pair(2, "red mug")])
    hits = search_topk(index, "red", 10)
    assert [h.pair.id for h in hits] == [0, 2]


def test_ties_by_doc_id():
    index = build_index([make_pair(i, "same text") for i in range(4)])
    for _ in range(3):
        assert [h.doc_id for h in search_topk(index, "text", 3)] == [0, 1, 2]


def test_exclude():
    index = build_index([make_pair(0, "red shoe"), make_pair(1, "red shoe"), make_pair(2, "red")])
    assert [h.doc_id for h in search_topk(index, "red shoe", 5, exclude=[0])] == [1, 2]


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        search_topk(build_index([make_pair(0, "a")]), "a", 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.sampled_from(WORDS), min_size=0, max_size=8), min_size=1, max_size=30),
       st.lists(st.sampled_from(WORDS + ["zzz"]), min_size=1, max_size=6),
       st.integers(1, 8))
def test_search_matches_brute_force(docs, query, k):
    pairs = [make_pair(i, " ".join(d) or "!") for i, d in enumerate(docs)]
    index = build_index(pairs)
    hits = search_topk(index, " ".join(query), k)
    expected = brute_topk([tokenize(p.src_text) for p in pairs], query, k)
    assert [h.doc_id for h in hits] == [i for i, _ in expected]
    for h, (_, s) in zip(hits, expected):
        assert h.score == pytest.approx(s, abs=1e-9)
    assert all(a.score >= b.score for a, b in zip(hits, hits[1:]))
    assert all(h.score > 0 for h in hits)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.text(alphabet="abc d", max_size=10).filter(str.strip), min_size=1, max_size=25),
       st.integers(0, 25), st.data())
def test_incremental_equals_batch(texts, split, data):
    pairs = [make_pair(i, t) for i, t in enumerate(texts)]
    split = min(split, len(pairs))
    inc = build_index(pairs[:split], lang="en-de")
    for p in pairs[split:]:
        add_pair(inc, p)
    batch = build_index(pairs)
    query = data.draw(st.text(alphabet="abc d", max_size=8))
    assert inc.postings == batch.postings and inc.doc_len == batch.doc_len
    assert search_topk(inc, query, 5) == search_topk(batch, query, 5)


def test_idf_never_negative():
    index = build_index([make_pair(i, "common") for i in range(7)])
    assert index.idf("common") > 0
    assert index.idf("absent") > 0


def test_params_validated():
    with pytest.raises(ValueError):
        BM25Params(k1=-1)
    with pytest.raises(ValueError):
        BM25Params(b=1.5)


def test_custom_params_change_scores():
    texts = ["red shoe shoe shoe", "red"]
    a = build_index([make_pair(i, t) for i, t in enumerate(texts)], BM25Params(2.0, 0.3))
    expected = brute_bm25([tokenize(t) for t in texts], ["red", "shoe"], k1=2.0, b=0.3)
    assert np.allclose(a.score_all(["red", "shoe"]), expected, atol=1e-12, rtol=0)


# -- kernels ------------------------------------------------------------------

def test_numba_and_numpy_kernels_agree():
    rng = np.random.default_rng(0)
    n = 5000
    doc_len = rng.integers(1, 30, n).astype(np.float64)
    s1, s2 = np.zeros(n), np.zeros(n)
    for _ in range(5):
        docs = np.sort(rng.choice(n, 400, replace=False)).astype(np.int64)
        tfs = rng.integers(1, 4, 400).astype(np.int64)
        kernels.accumulate_numpy(s1, docs, tfs, 1.7, doc_len, 1.2, 0.75, 12.3)
        kernels.accumulate_numba(s2, docs, tfs, 1.7, doc_len, 1.2, 0.75, 12.3)
    assert np.array_equal(s1, s2)
    s1[::7] = s1[3]  # inject ties
    for k in (1, 10, 10_000):
        assert np.array_equal(kernels.topk_numpy(s1, k), kernels.topk_numba(s1, k))


def test_topk_tie_break_and_positive_only():
    scores = np.array([0.0, 2.0, 1.0, 2.0, -0.0, 1.0])
    for fn in (kernels.topk_numpy, kernels.topk_numba):
        assert fn(scores, 10).tolist() == [1, 3, 2, 5]
        assert fn(scores, 2).tolist() == [1, 3]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 3.25]), max_size=120), st.integers(1, 130))
def test_topk_matches_full_sort(values, k):
    scores = np.array(values, dtype=np.float64)
    want = sorted((i for i, v in enumerate(values) if v > 0), key=lambda i: (-values[i], i))[:k]
    for fn in (kernels.topk_numpy, kernels.topk_numba):
        assert fn(scores, k).tolist() == want


def test_backend_flag(monkeypatch):
    import importlib
    monkeypatch.setenv(kernels.DISABLE_ENV, "1")
    reloaded = importlib.reload(kernels)
    try:
        assert reloaded.BACKEND == "numpy"
        assert reloaded.accumulate is reloaded.accumulate_numpy
    finally:
        monkeypatch.delenv(kernels.DISABLE_ENV)
        importlib.reload(kernels)


# -- persistence --------------------------------------------------------------

def test_roundtrip_empty(tmp_path):
    index = build_index([], lang="en-de", domain="tbd")
    save_index(index, tmp_path / "idx")
    loaded = load_index(tmp_path / "idx")
    assert loaded.n_docs == 0 and loaded.lang == EN_DE and loaded.domain is Domain.TBD


def test_roundtrip_preserves_results(tmp_path):
    rng = random.Random(2)
    texts = random_docs(rng, 500, vocab=WORDS + ["Hülle", "Stoßdämpfer", "łódź"])
    index = build_index([make_pair(i, t, domain=Domain.BP) for i, t in enumerate(texts)], BM25Params(1.5, 0.6))
    save_index(index, tmp_path / "idx")
    loaded = load_index(tmp_path / "idx")
    assert loaded.params == BM25Params(1.5, 0.6) and loaded.domain is Domain.BP
    assert loaded.postings == index.postings and loaded.store == index.store
    for q in random_docs(rng, 50, max_len=5):
        assert search_topk(loaded, q, 5) == search_topk(index, q, 5)


def test_rebuild_is_byte_identical(tmp_path):
    pairs = [make_pair(i, t) for i, t in enumerate(random_docs(random.Random(3), 100))]
    save_index(build_index(pairs), tmp_path / "a")
    save_index(build_index(pairs), tmp_path / "b")
    for name in ("manifest.json", "postings.bin", "store.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("name", ["postings.bin", "store.jsonl"])
def test_truncated_file_rejected(tmp_path, name):
    pairs = [make_pair(i, t) for i, t in enumerate(random_docs(random.Random(4), 50))]
    save_index(build_index(pairs), tmp_path / "idx")
    path = tmp_path / "idx" / name
    path.write_bytes(path.read_bytes()[:-7])
    with pytest.raises(IndexFormatError, match="checksum"):
        load_index(tmp_path / "idx")


def test_version_mismatch(tmp_path):
    import json
    save_index(build_index([make_pair(0, "a")]), tmp_path / "idx")
    mpath = tmp_path / "idx" / "manifest.json"
    manifest = json.loads(mpath.read_text())
    manifest["version"] = 99
    mpath.write_text(json.dumps(manifest))
    with pytest.raises(IndexFormatError, match="version"):
        load_index(tmp_path / "idx")


def test_missing_index(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_index(tmp_path / "nope")


def test_add_after_load(tmp_path):
    pairs = [make_pair(i, t) for i, t in enumerate(random_docs(random.Random(6), 40))]
    save_index(build_index(pairs[:30]), tmp_path / "idx")
    loaded = load_index(tmp_path / "idx")
    for p in pairs[30:]:
        add_pair(loaded, p)
    full = build_index(pairs)
    for q in ("red shoe", "kyb 343441", "metal"):
        assert search_topk(loaded, q, 5) == search_topk(full, q, 5)
