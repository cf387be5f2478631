"""On-disk index format.

An index directory holds three files::

    manifest.json   {"format": "ragmt-index", "version": 1, "tokenizer_version": 1,
                     "lang": "en-de", "domain": "TTL" | null, "params": {"k1", "b"},
                     "n_docs", "n_terms", "total_len",
                     "checksums": {"postings.bin": sha256-hex, "store.jsonl": sha256-hex}}
    postings.bin    little-endian binary, see below
    store.jsonl     one pair per line in doc-id order
                    ({"domain", "id", "lang", "src_text", "tgt_text"}, sorted keys)

``postings.bin``::

    magic    8 bytes  b"RGMTPST1"
    n_docs   u32
    doc_len  n_docs x u32
    n_terms  u32
    n_terms records, sorted by term:
        term_len u32, term utf-8 bytes,
        n_post   u32, n_post x (doc_id u32, tf u32)

Both data files are verified against the manifest checksums before parsing;
a mismatch raises :class:`IndexFormatError` and nothing is returned.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from array import array
from pathlib import Path

import numpy as np

from ..corpus import BilingualPair
from ..textproc import TOKENIZER_VERSION
from .index import BM25Params, RetrievalIndex

FORMAT_NAME = "ragmt-index"
FORMAT_VERSION = 1
MAGIC = b"RGMTPST1"
MANIFEST = "manifest.json"
POSTINGS = "postings.bin"
STORE = "store.jsonl"

_U32 = struct.Struct("<I")
_POSTING = np.dtype([("doc", "<u4"), ("tf", "<u4")])


class IndexFormatError(ValueError):
    """Corrupt, truncated, or incompatible index directory."""


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _encode_postings(index: RetrievalIndex) -> bytes:
    out = [MAGIC, _U32.pack(index.n_docs), np.asarray(index._doc_len, dtype="<u4").tobytes(),
           _U32.pack(len(index._postings))]
    for term in sorted(index._postings):
        docs, tfs = index._postings[term]
        raw = term.encode("utf-8")
        rec = np.empty(len(docs), dtype=_POSTING)
        rec["doc"] = docs
        rec["tf"] = tfs
        out += [_U32.pack(len(raw)), raw, _U32.pack(len(docs)), rec.tobytes()]
    return b"".join(out)


def _encode_store(index: RetrievalIndex) -> bytes:
    lines = [json.dumps(p.to_json(), ensure_ascii=False, sort_keys=True) for p in index.store]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def save_index(index: RetrievalIndex, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    postings = _encode_postings(index)
    store = _encode_store(index)
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "tokenizer_version": TOKENIZER_VERSION,
        "lang": str(index.lang),
        "domain": index.domain.value if index.domain else None,
        "params": {"k1": index.params.k1, "b": index.params.b},
        "n_docs": index.n_docs,
        "n_terms": len(index._postings),
        "total_len": index.total_len,
        "checksums": {POSTINGS: _sha256(postings), STORE: _sha256(store)},
    }
    # data files first, manifest last: a crash mid-save leaves a checksum mismatch
    for name, data in ((POSTINGS, postings), (STORE, store)):
        tmp = directory / (name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, directory / name)
    tmp = directory / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, directory / MANIFEST)
    return directory


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"no index at {directory} (missing {MANIFEST})") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IndexFormatError(f"{path}: unreadable manifest ({exc})") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise IndexFormatError(f"{path}: not a {FORMAT_NAME} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise IndexFormatError(f"{path}: index version {manifest.get('version')}, expected {FORMAT_VERSION}")
    if manifest.get("tokenizer_version") != TOKENIZER_VERSION:
        raise IndexFormatError(
            f"{path}: built with tokenizer v{manifest.get('tokenizer_version')}, this build uses v{TOKENIZER_VERSION}")
    return manifest


def _decode_postings(data: bytes):
    if data[:8] != MAGIC:
        raise IndexFormatError("postings file has a bad magic number")
    pos = 8

    def u32():
        nonlocal pos
        if pos + 4 > len(data):
            raise IndexFormatError("postings file truncated")
        (v,) = _U32.unpack_from(data, pos)
        pos += 4
        return v

    n_docs = u32()
    if pos + 4 * n_docs > len(data):
        raise IndexFormatError("postings file truncated")
    doc_len = np.frombuffer(data, dtype="<u4", count=n_docs, offset=pos)
    pos += 4 * n_docs
    postings = {}
    for _ in range(u32()):
        n = u32()
        term = data[pos:pos + n].decode("utf-8")
        pos += n
        count = u32()
        if pos + _POSTING.itemsize * count > len(data):
            raise IndexFormatError("postings file truncated")
        rec = np.frombuffer(data, dtype=_POSTING, count=count, offset=pos)
        pos += _POSTING.itemsize * count
        postings[term] = (array("q", rec["doc"].astype(np.int64)), array("q", rec["tf"].astype(np.int64)))
    if pos != len(data):
        raise IndexFormatError("trailing bytes in postings file")
    return n_docs, doc_len, postings


def load_index(directory) -> RetrievalIndex:
    directory = Path(directory)
    manifest = read_manifest(directory)
    blobs = {}
    for name in (POSTINGS, STORE):
        try:
            blobs[name] = (directory / name).read_bytes()
        except FileNotFoundError:
            raise IndexFormatError(f"{directory}: missing {name}") from None
        expected = manifest.get("checksums", {}).get(name)
        if _sha256(blobs[name]) != expected:
            raise IndexFormatError(f"{directory / name}: checksum mismatch")
    try:
        n_docs, doc_len, postings = _decode_postings(blobs[POSTINGS])
        store = [BilingualPair.from_json(json.loads(line))
                 for line in blobs[STORE].decode("utf-8").splitlines() if line]
    except IndexFormatError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise IndexFormatError(f"{directory}: malformed index data ({exc})") from exc
    if not n_docs == len(store) == manifest["n_docs"]:
        raise IndexFormatError(f"{directory}: document counts disagree")
    if int(doc_len.sum()) != manifest["total_len"]:
        raise IndexFormatError(f"{directory}: total length disagrees with manifest")
    params = BM25Params(**manifest["params"])
    index = RetrievalIndex(manifest["lang"], manifest["domain"], params)
    index.store = store
    index._postings = postings
    index._doc_len = array("q", doc_len.astype(np.int64))
    index._total_len = int(doc_len.sum())
    for doc_id, pair in enumerate(store):
        index._pair_docs.setdefault(pair.id, doc_id)
    return index
