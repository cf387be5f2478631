"""Bilingual product-information records: loading, validation, sampling.

Interchange format is UTF-8 JSONL (no BOM)::

    {"src_text": "...", "tgt_text": "...", "domain": "TTL"}

or TSV with fixed column order ``src<TAB>tgt<TAB>domain``. Test sets use
``{"src_title": ..., "ref_translation": ...}`` or ``src<TAB>ref``.

Text is stored verbatim; normalization only happens inside indexing and
metrics so prompts show the original catalog text.
"""
from __future__ import annotations

import enum
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)

FORMATS = ("jsonl", "tsv")


class CorpusError(ValueError):
    """Raised for unreadable or invalid corpus / test-set files."""


class Domain(str, enum.Enum):
    TTL = "TTL"
    BP = "BP"
    PD = "PD"
    # query-time union of the three stored domains; never stored on a record
    TBD = "TBD"

    @classmethod
    def parse(cls, value: "str | Domain") -> "Domain":
        if isinstance(value, Domain):
            return value
        key = str(value).strip().upper().replace(".", "")
        try:
            return cls(key)
        except ValueError:
            raise CorpusError(f"unknown domain tag {value!r}") from None

    @property
    def label(self) -> str:
        return "T.B.D." if self is Domain.TBD else self.value

    def members(self) -> tuple["Domain", ...]:
        if self is Domain.TBD:
            return STORED_DOMAINS
        return (self,)


STORED_DOMAINS = (Domain.TTL, Domain.BP, Domain.PD)
GRID_DOMAINS = STORED_DOMAINS + (Domain.TBD,)


@dataclass(frozen=True)
class LanguagePair:
    src: str
    tgt: str

    def __post_init__(self):
        for code in (self.src, self.tgt):
            if len(code) != 2 or not code.isalpha() or code != code.lower():
                raise ValueError(f"language codes must be 2 lowercase letters, got {code!r}")
        if self.src == self.tgt:
            raise ValueError(f"source and target language are both {self.src!r}")

    @classmethod
    def parse(cls, value: "str | LanguagePair") -> "LanguagePair":
        if isinstance(value, LanguagePair):
            return value
        parts = str(value).replace("_", "-").split("-")
        if len(parts) != 2:
            raise ValueError(f"expected SRC-TGT language pair, got {value!r}")
        return cls(parts[0].strip().lower(), parts[1].strip().lower())

    def __str__(self) -> str:
        return f"{self.src}-{self.tgt}"


@dataclass(frozen=True)
class BilingualPair:
    id: int
    src_text: str
    tgt_text: str
    domain: Domain
    lang: LanguagePair

    def __post_init__(self):
        if not self.src_text.strip() or not self.tgt_text.strip():
            raise ValueError(f"pair {self.id}: source and target text must be non-empty")
        if self.domain is Domain.TBD:
            raise ValueError(f"pair {self.id}: TBD is a query-time union, not a record domain")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "src_text": self.src_text,
            "tgt_text": self.tgt_text,
            "domain": self.domain.value,
            "lang": str(self.lang),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BilingualPair":
        return cls(
            id=int(obj["id"]),
            src_text=obj["src_text"],
            tgt_text=obj["tgt_text"],
            domain=Domain.parse(obj["domain"]),
            lang=LanguagePair.parse(obj["lang"]),
        )


@dataclass(frozen=True)
class TestSegment:
    src_title: str
    ref_translation: str

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.src_title.strip() or not self.ref_translation.strip():
            raise ValueError("test segment title and reference must be non-empty")


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of pairs for one language pair."""

    lang: LanguagePair
    pairs: tuple[BilingualPair, ...] = ()
    malformed: int = 0
    malformed_lines: tuple[int, ...] = field(default=(), repr=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[BilingualPair]:
        return iter(self.pairs)

    def pool(self, domain: "Domain | str") -> list[BilingualPair]:
        """Pairs of ``domain`` in corpus order; TBD returns all stored domains."""
        wanted = set(Domain.parse(domain).members())
        return [p for p in self.pairs if p.domain in wanted]


def _read_lines(path: Path) -> list[str]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    if raw.startswith(b"\xef\xbb\xbf"):
        raise CorpusError(f"{path}: UTF-8 byte-order mark not allowed")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path}: not valid UTF-8 ({exc})") from exc
    return text.splitlines()


def _records(lines: Sequence[str], fmt: str, fields: tuple[str, ...], optional: tuple[str, ...] = ()):
    """Yield (line_no, record-or-None, reason) for every non-blank line."""
    if fmt not in FORMATS:
        raise CorpusError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    for line_no, line in enumerate(lines):
        if not line.strip():
            continue
        if fmt == "jsonl":
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_no, None, f"invalid JSON ({exc.msg})"
                continue
            if not isinstance(obj, dict):
                yield line_no, None, "record is not a JSON object"
                continue
        else:
            cols = line.split("\t")
            if len(cols) < len(fields):
                cols += [""] * (len(fields) - len(cols))
            obj = dict(zip(fields + optional, cols))
        missing = [f for f in fields if not isinstance(obj.get(f), str) or not obj[f].strip()]
        if missing:
            yield line_no, None, f"missing or empty field(s): {', '.join(missing)}"
            continue
        yield line_no, obj, None


def _handle_malformed(path, line_no, reason, strict, bad):
    if strict:
        raise CorpusError(f"{path}: line {line_no + 1}: {reason}")
    logger.debug("%s: skipping line %d: %s", path, line_no + 1, reason)
    bad.append(line_no)


def ingest_pairs(path, format: str = "jsonl", lang: "LanguagePair | str" = "en-de", strict: bool = False) -> Corpus:
    """Load a bilingual corpus.

    Pair ids are zero-based line numbers of the input file, so they stay
    stable if malformed lines are later repaired. In lenient mode (default)
    malformed lines are skipped and counted; in strict mode the first one
    raises. An unknown domain tag always raises.
    """
    path = Path(path)
    lang = LanguagePair.parse(lang)
    lines = _read_lines(path)
    pairs, bad = [], []
    for line_no, obj, reason in _records(lines, format, ("src_text", "tgt_text", "domain")):
        if obj is None:
            _handle_malformed(path, line_no, reason, strict, bad)
            continue
        try:
            domain = Domain.parse(obj["domain"])
        except CorpusError as exc:
            raise CorpusError(f"{path}: line {line_no + 1}: {exc}") from None
        if domain is Domain.TBD:
            raise CorpusError(f"{path}: line {line_no + 1}: TBD cannot be stored on a record")
        pairs.append(BilingualPair(line_no, obj["src_text"], obj["tgt_text"], domain, lang))
    if bad:
        logger.warning("%s: skipped %d malformed line(s)", path, len(bad))
    if not pairs:
        logger.warning("%s: corpus is empty", path)
    return Corpus(lang, tuple(pairs), len(bad), tuple(bad))


def load_test_set(path, format: str = "jsonl", strict: bool = False) -> list[TestSegment]:
    path = Path(path)
    segments, bad = [], []
    for line_no, obj, reason in _records(_read_lines(path), format, ("src_title", "ref_translation")):
        if obj is None:
            _handle_malformed(path, line_no, reason, strict, bad)
            continue
        segments.append(TestSegment(obj["src_title"], obj["ref_translation"]))
    if bad:
        logger.warning("%s: skipped %d malformed line(s)", path, len(bad))
    if not segments:
        logger.warning("%s: test set is empty", path)
    return segments


def sample_random(corpus: "Corpus | Iterable[BilingualPair]", domain: "Domain | str", k: int, seed: int) -> list[BilingualPair]:
    """Draw ``k`` distinct pairs of ``domain`` without replacement.

    A pure function of (corpus contents, domain, k, seed).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if isinstance(corpus, Corpus):
        pool = corpus.pool(domain)
    else:
        wanted = set(Domain.parse(domain).members())
        pool = [p for p in corpus if p.domain in wanted]
    if len(pool) < k:
        raise ValueError(f"domain {Domain.parse(domain).label} has {len(pool)} pair(s), cannot sample {k}")
    return random.Random(seed).sample(pool, k)


def write_pairs_jsonl(pairs: Iterable[dict], path) -> None:
    """Write plain dict records as canonical JSONL."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in pairs:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
