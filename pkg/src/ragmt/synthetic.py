"""Seeded synthetic bilingual catalog for end-to-end runs without real data.

Every test title belongs to a product *family*. Each stored domain holds a
near-duplicate of the title (one content word swapped, padded with extra
words in BP/PD), so retrieval has something useful to find. For a share of
the families the near-duplicate carries another brand and model number,
and a short *decoy* that shares only brand and model is added: BM25's idf
weighting ranks the decoy first, while the near-duplicate, the better
example by characters, sits lower in the top-5. Filler records make up the
rest of the corpus.

"Translation" is a fixed word-by-word substitution into invented target
words; brand names and model numbers are copied unchanged.
"""
from __future__ import annotations

import random
import string
from dataclasses import dataclass
from pathlib import Path

from .corpus import STORED_DOMAINS, Domain, write_pairs_jsonl

PAD_RANGE = {Domain.TTL: (0, 0), Domain.BP: (3, 5), Domain.PD: (8, 12)}


@dataclass
class SyntheticData:
    pairs: list[dict]
    test: list[dict]
    n_decoy_families: int


class _Vocab:
    def __init__(self, rng: random.Random, n_common: int, n_rare: int):
        self.rng = rng
        self.used: set[str] = set()
        self.common = [self.word(5, 9) for _ in range(n_common)]
        self.rare = [self.word(5, 10) for _ in range(n_rare)]
        self.target = {w: self.word(5, 11) for w in self.common + self.rare}

    def word(self, lo: int, hi: int) -> str:
        while True:
            w = "".join(self.rng.choice(string.ascii_lowercase) for _ in range(self.rng.randint(lo, hi)))
            if w not in self.used:
                self.used.add(w)
                return w

    def brand(self) -> str:
        return self.word(5, 7).capitalize()

    def model(self) -> str:
        while True:
            m = self.rng.choice(string.ascii_uppercase) + str(self.rng.randint(100, 999))
            if m not in self.used:
                self.used.add(m)
                return m

    def translate(self, tokens: list[str]) -> str:
        return " ".join(self.target.get(t, t) for t in tokens)


def make_synthetic(seed: int = 0, n_pairs: int = 2000, n_test: int = 200, decoy_rate: float = 0.35,
                   n_common: int = 40, n_rare: int = 600) -> SyntheticData:
    rng = random.Random(seed)
    vocab = _Vocab(rng, n_common, n_rare)
    pairs: list[tuple[list[str], Domain]] = []
    test = []
    n_decoy = 0

    def pad(domain: Domain, scale: float = 1.0) -> list[str]:
        lo, hi = PAD_RANGE[domain]
        return rng.sample(vocab.rare, int(rng.randint(lo, hi) * scale))

    for _ in range(n_test):
        brand, model = vocab.brand(), vocab.model()
        words = rng.sample(vocab.common, 6)
        title = [brand, model] + words
        test.append({"src_title": " ".join(title), "ref_translation": vocab.translate(title)})
        decoy = rng.random() < decoy_rate
        n_decoy += decoy
        for domain in STORED_DOMAINS:
            if decoy:
                near = [vocab.brand(), vocab.model()] + words
                pairs.append(([brand, model] + rng.sample(vocab.rare, 2) + pad(domain, 0.25), domain))
            else:
                near = list(title)
                swap = rng.randrange(2, len(near))
                near[swap] = rng.choice([w for w in vocab.common if w not in words])
            pairs.append((near + pad(domain), domain))

    while len(pairs) < n_pairs:
        domain = rng.choice(STORED_DOMAINS)
        body = rng.sample(vocab.common, 3) + rng.sample(vocab.rare, 3)
        rng.shuffle(body)
        pairs.append(([vocab.brand(), vocab.model()] + body + pad(domain), domain))

    rng.shuffle(pairs)
    records = [{"src_text": " ".join(toks), "tgt_text": vocab.translate(toks), "domain": d.value}
               for toks, d in pairs[:n_pairs]]
    return SyntheticData(records, test, n_decoy)


def write_synthetic(out_dir, seed: int = 0, n_pairs: int = 2000, n_test: int = 200, lang: str = "en-de",
                    backend: str = "mock_copy_best") -> dict[str, Path]:
    """Write ``pairs.jsonl``, ``test.jsonl`` and a full-grid ``grid.yaml``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = make_synthetic(seed, n_pairs, n_test)
    paths = {"pairs": out_dir / "pairs.jsonl", "test": out_dir / "test.jsonl", "grid": out_dir / "grid.yaml"}
    write_pairs_jsonl(data.pairs, paths["pairs"])
    write_pairs_jsonl(data.test, paths["test"])
    paths["grid"].write_text(
        f"seed: {seed}\n"
        "modes: [baseline, rand1, rand5, rag1, rag5]\n"
        "domains: [ttl, bp, pd, tbd]\n"
        f"backend: {{kind: {backend}}}\n"
        "experiments:\n"
        f"  - lang: {lang}\n"
        "    corpus: pairs.jsonl\n"
        "    test_set: test.jsonl\n",
        encoding="utf-8",
    )
    return paths
