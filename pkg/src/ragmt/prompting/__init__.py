"""Prompt rendering for zero-shot (template A) and few-shot (template B) translation.

The template files under ``templates/`` are fixed experimental assets,
including their spelling and trailing spaces; a variant needs a new
template id, never an edit to A or B.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from ..corpus import BilingualPair, Corpus, Domain, LanguagePair, sample_random

TEMPLATE_FILES = {"A": "template_a.txt", "B": "template_b.txt"}

LANGUAGE_NAMES = {
    "en": "English",
    "nl": "Dutch",
    "de": "German",
    "it": "Italian",
    "tr": "Turkish",
    "cs": "Czech",
    "pl": "Polish",
    "sv": "Swedish",
}

SRC_LANG = "<source language e.g. English>"
TITLE = "<title in the source language>"
TGT_LANG = "<target language>"
EX_SRC = "<source title>"
EX_TGT = "<title translation>"
# "<translation>" inside the JSON scaffold is literal output format, not a slot
PLACEHOLDERS = (SRC_LANG, TITLE, TGT_LANG, EX_SRC, EX_TGT)
_SLOT_RE = re.compile("|".join(re.escape(p) for p in PLACEHOLDERS))
_EXAMPLE_RE = re.compile(r"^(\s*Example )1(:.*)$")


class PromptError(ValueError):
    pass


@lru_cache(maxsize=None)
def load_template(template_id: str) -> str:
    try:
        name = TEMPLATE_FILES[template_id]
    except KeyError:
        raise PromptError(f"unknown template id {template_id!r}") from None
    text = resources.files(__package__).joinpath("templates", name).read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


@dataclass(frozen=True)
class ShotMode:
    """Baseline (no examples), Rand(k) random examples, or Rag(k) retrieved examples."""

    kind: str
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("baseline", "rand", "rag"):
            raise ValueError(f"unknown shot mode {self.kind!r}")
        if self.kind == "baseline" and self.k is not None:
            raise ValueError("baseline mode carries no k")
        if self.kind != "baseline" and (self.k is None or self.k < 1):
            raise ValueError(f"{self.kind} mode needs k >= 1")

    @classmethod
    def parse(cls, value: "str | ShotMode", k: int | None = None) -> "ShotMode":
        """Accept ``baseline``, ``rag5``, ``rand-1``, ``RAG 5-shot`` or a kind plus ``k``."""
        if isinstance(value, ShotMode):
            return value
        m = re.fullmatch(r"\s*(baseline|rand|rag)[\s_-]*(\d+)?(?:[\s_-]*shot)?\s*", str(value), re.I)
        if not m:
            raise ValueError(f"cannot parse shot mode {value!r}")
        kind = m.group(1).lower()
        if kind == "baseline":
            return cls("baseline")
        return cls(kind, int(m.group(2)) if m.group(2) else k)

    @property
    def key(self) -> str:
        return "baseline" if self.kind == "baseline" else f"{self.kind}{self.k}"

    @property
    def label(self) -> str:
        return "Baseline" if self.kind == "baseline" else f"{self.kind.upper()} {self.k}-shot"

    @property
    def template_id(self) -> str:
        return "A" if self.kind == "baseline" else "B"


BASELINE = ShotMode("baseline")


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    template_id: str
    example_ids: tuple[int, ...]
    lang: LanguagePair
    title: str
    examples: tuple[BilingualPair, ...] = field(default=(), repr=False)
    seed: int | None = None
    requested_k: int = 0

    @property
    def shortfall(self) -> int:
        return max(0, self.requested_k - len(self.example_ids))


def _names(lang: LanguagePair, lang_names: Mapping[str, str] | None) -> tuple[str, str]:
    names = {**LANGUAGE_NAMES, **(lang_names or {})}
    missing = [c for c in (lang.src, lang.tgt) if c not in names]
    if missing:
        raise PromptError(f"no display name for language(s): {', '.join(missing)}")
    return names[lang.src], names[lang.tgt]


def _fill(template: str, values: Mapping[str, str]) -> str:
    # single pass, so placeholder-like text inside inserted values stays verbatim
    return _SLOT_RE.sub(lambda m: values[m.group(0)], template)


def render_baseline(title: str, lang: "LanguagePair | str", lang_names: Mapping[str, str] | None = None,
                    seed: int | None = None) -> RenderedPrompt:
    if not title.strip():
        raise PromptError("title must be non-empty")
    lang = LanguagePair.parse(lang)
    src_name, tgt_name = _names(lang, lang_names)
    text = _fill(load_template("A"), {SRC_LANG: src_name, TITLE: title, TGT_LANG: tgt_name})
    return RenderedPrompt(text, "A", (), lang, title, (), seed, 0)


def _split_b(template: str) -> tuple[list[str], list[str], list[str]]:
    """Header lines, the two-line Example 1 unit, and footer lines of template B."""
    lines = template.split("\n")
    starts = [i for i, line in enumerate(lines) if re.match(r"^\s*Example \d+:", line)]
    first, last = starts[0], starts[-1] + 1
    return lines[:first], lines[first:first + 2], lines[last + 1:]


def render_fewshot(title: str, lang: "LanguagePair | str", lang_names: Mapping[str, str] | None,
                   examples: Sequence[BilingualPair], seed: int | None = None,
                   requested_k: int | None = None) -> RenderedPrompt:
    """Template B with one numbered block per example, in the given order."""
    if not title.strip():
        raise PromptError("title must be non-empty")
    if not examples:
        raise PromptError("few-shot prompt needs at least one example; use render_baseline for zero shots")
    lang = LanguagePair.parse(lang)
    src_name, tgt_name = _names(lang, lang_names)
    header, unit, footer = _split_b(load_template("B"))
    head = _EXAMPLE_RE.match(unit[0])
    blocks = []
    for i, ex in enumerate(examples, start=1):
        first = f"{head.group(1)}{i}{head.group(2)}"
        blocks.append(_fill(first, {EX_SRC: ex.src_text}))
        blocks.append(_fill(unit[1], {EX_TGT: ex.tgt_text}))
    values = {SRC_LANG: src_name, TITLE: title, TGT_LANG: tgt_name}
    text = "\n".join([_fill("\n".join(header), values), *blocks, _fill("\n".join(footer), values)])
    return RenderedPrompt(text, "B", tuple(ex.id for ex in examples), lang, title, tuple(examples), seed,
                          requested_k if requested_k is not None else len(examples))


def segment_seed(run_seed: int, segment_index: int) -> int:
    """Per-segment sampling seed derived from the run seed."""
    return int(np.random.SeedSequence([run_seed, segment_index]).generate_state(1)[0])


def select_examples(mode: "ShotMode | str", title: str, *, index=None, corpus: "Corpus | Sequence[BilingualPair] | None" = None,
                    domain: "Domain | str | None" = None, seed: int | None = None,
                    exclude_exact: bool = False) -> list[BilingualPair]:
    """Few-shot examples for ``title``: retrieved (rag), sampled (rand), or none.

    ``exclude_exact`` drops pairs whose source text equals the title, for
    test sets that overlap the index.
    """
    mode = ShotMode.parse(mode)
    if mode.kind == "baseline":
        return []
    if mode.kind == "rag":
        if index is None:
            raise ValueError("rag mode needs an index")
        exclude = [d for d, p in enumerate(index.store) if p.src_text == title] if exclude_exact else ()
        return [hit.pair for hit in index.search(title, mode.k, exclude)]
    if corpus is None or seed is None:
        raise ValueError("rand mode needs a corpus and a seed")
    if domain is None:
        domain = Domain.TBD
    pool = corpus.pool(domain) if isinstance(corpus, Corpus) else list(corpus)
    if exclude_exact:
        pool = [p for p in pool if p.src_text != title]
    return sample_random(pool, domain, mode.k, seed)


def render(mode: "ShotMode | str", title: str, lang, examples: Sequence[BilingualPair],
           lang_names: Mapping[str, str] | None = None, seed: int | None = None) -> RenderedPrompt:
    """Template A for baseline, template B otherwise.

    A retrieval that came back empty still needs a prompt; it falls back to
    template A and the shortfall is visible via ``requested_k``.
    """
    mode = ShotMode.parse(mode)
    if mode.kind == "baseline":
        return render_baseline(title, lang, lang_names, seed)
    if not examples:
        prompt = render_baseline(title, lang, lang_names, seed)
        return RenderedPrompt(prompt.text, "A", (), prompt.lang, title, (), seed, mode.k)
    return render_fewshot(title, lang, lang_names, examples, seed, mode.k)


__all__ = [
    "BASELINE",
    "LANGUAGE_NAMES",
    "PLACEHOLDERS",
    "PromptError",
    "RenderedPrompt",
    "ShotMode",
    "load_template",
    "render",
    "render_baseline",
    "render_fewshot",
    "segment_seed",
    "select_examples",
]
