import json
import re
from pathlib import Path

import pytest

from ragmt.corpus import Corpus, Domain
from ragmt.prompting import (PLACEHOLDERS, PromptError, ShotMode, load_template, render, render_baseline,
                             render_fewshot, select_examples)
from ragmt.retrieval import build_index
from conftest import EN_DE, make_pair

GOLDEN = Path(__file__).parent / "golden"
FIXTURE = json.loads((GOLDEN / "fixture.json").read_text(encoding="utf-8"))
EXAMPLES = [make_pair(i, s, t) for i, (s, t) in enumerate(FIXTURE["examples"])]


def golden(name):
    return (GOLDEN / name).read_text(encoding="utf-8")


def test_template_a_golden():
    prompt = render_baseline(FIXTURE["title"], FIXTURE["lang"])
    assert prompt.text == golden("template_a_en_de.txt")
    assert prompt.template_id == "A" and prompt.example_ids == ()


@pytest.mark.parametrize("k", [1, 5])
def test_template_b_golden(k):
    prompt = render_fewshot(FIXTURE["title"], FIXTURE["lang"], None, EXAMPLES[:k])
    assert prompt.text == golden(f"template_b_en_de_k{k}.txt")
    assert prompt.template_id == "B" and prompt.example_ids == tuple(range(k))


def test_template_assets_keep_original_wording():
    assert "Below are a few translaton examples:" in load_template("B")
    for tid in ("A", "B"):
        assert "Return your response in JSON format" in load_template(tid)
        assert '{"translation": <translation>}' in load_template(tid)


def test_baseline_red_mug():
    text = render_baseline("Red Mug", "en-de").text
    assert "translate the source text into German" in text
    assert '{"translation": <translation>}' in text
    assert "in English: Red Mug " in text


def test_placeholders_closed():
    for prompt in (render_baseline("Red Mug", "en-pl"), render_fewshot("Red Mug", "it-de", None, EXAMPLES[:3])):
        for ph in PLACEHOLDERS:
            assert ph not in prompt.text.replace(EXAMPLES[3].src_text, "")


def test_blocks_in_given_order():
    text = render_fewshot("x", "en-de", None, EXAMPLES).text
    numbers = re.findall(r"^    Example (\d+): source: ", text, re.M)
    assert numbers == ["1", "2", "3", "4", "5"]
    positions = [text.index(f"source: {e.src_text}, ") for e in EXAMPLES]
    assert positions == sorted(positions)
    assert "Refer to the provided translation examples" in text


def test_inserted_text_verbatim():
    # a title containing "Example" or placeholder syntax is legal and untouched
    title = "Example 1: source: <target language>"
    text = render_fewshot(title, "en-de", None, EXAMPLES[:1]).text
    assert f"\n{title} \n" in text
    assert "into German." in text


def test_errors():
    with pytest.raises(PromptError):
        render_baseline("  ", "en-de")
    with pytest.raises(PromptError):
        render_fewshot("x", "en-de", None, [])
    with pytest.raises(PromptError, match="display name"):
        render_baseline("x", "en-fi")
    assert "into Finnish" in render_baseline("x", "en-fi", {"fi": "Finnish"}).text


def test_rendering_is_pure():
    a = render_fewshot("x", "en-nl", None, EXAMPLES, seed=3)
    b = render_fewshot("x", "en-nl", None, EXAMPLES, seed=3)
    assert a == b


def test_shot_mode_parse():
    assert ShotMode.parse("baseline") == ShotMode("baseline")
    assert ShotMode.parse("RAG 5-shot") == ShotMode("rag", 5)
    assert ShotMode.parse("rand-1") == ShotMode("rand", 1)
    assert ShotMode.parse("rag", k=3).label == "RAG 3-shot"
    with pytest.raises(ValueError):
        ShotMode("baseline", 2)
    with pytest.raises(ValueError):
        ShotMode("rag")


def _corpus():
    texts = ["red shoe", "blue mug", "pink slim case", "kyb shock absorber 343441", "metal sign", "red mug"]
    pairs = [make_pair(i, t, domain=[Domain.TTL, Domain.BP][i % 2]) for i, t in enumerate(texts)]
    return Corpus(EN_DE, tuple(pairs))


def test_select_baseline():
    assert select_examples("baseline", "red shoe") == []


def test_select_rag_exact_title():
    corpus = _corpus()
    index = build_index(corpus.pairs)
    got = select_examples(ShotMode("rag", 1), "kyb shock absorber 343441", index=index)
    assert [p.id for p in got] == [3]


def test_select_rag_exclude_exact():
    index = build_index(_corpus().pairs)
    got = select_examples(ShotMode("rag", 2), "red shoe", index=index, exclude_exact=True)
    assert 0 not in [p.id for p in got] and got


def test_select_rand_reproducible_and_domain_filtered():
    corpus = _corpus()
    a = select_examples(ShotMode("rand", 2), "x", corpus=corpus, domain="bp", seed=7)
    assert a == select_examples(ShotMode("rand", 2), "x", corpus=corpus, domain="bp", seed=7)
    assert all(p.domain is Domain.BP for p in a)
    with pytest.raises(ValueError):
        select_examples(ShotMode("rand", 2), "x", corpus=corpus)


def test_render_records_shortfall():
    index = build_index(_corpus().pairs)
    examples = select_examples(ShotMode("rag", 5), "red", index=index)
    prompt = render(ShotMode("rag", 5), "red", "en-de", examples)
    assert len(prompt.example_ids) == 2 and prompt.shortfall == 3
    empty = render(ShotMode("rag", 5), "nothing", "en-de", [])
    assert empty.template_id == "A" and empty.shortfall == 5
