"""Experiment grid: {Baseline, RAND-1, RAND-5, RAG-1, RAG-5} x {TTL, BP, PD, T.B.D.}.

A grid file (YAML or JSON) looks like::

    seed: 13
    modes: [baseline, rand1, rand5, rag1, rag5]
    domains: [ttl, bp, pd, tbd]
    backend: {kind: mock_copy_best}
    chrf: {max_n: 6, beta: 2.0, strip_ws: true}
    chrf_average: micro            # or "sentence"
    bm25: {k1: 1.2, b: 0.75}
    exclude_exact: false
    lang_names: {se: Swedish}      # optional display-name overrides
    experiments:
      - lang: en-pl
        corpus: data/en-pl.pairs.jsonl
        test_set: data/en-pl.test.jsonl
        index_dir: indexes/en-pl   # optional; holds ttl/ bp/ pd/ tbd/

Relative paths resolve against the grid file's directory. Reports record
paths exactly as written so reruns from another directory stay
byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .corpus import GRID_DOMAINS, Corpus, Domain, LanguagePair, TestSegment, ingest_pairs, load_test_set
from .llm import OK, PARSE_FAILED, TRANSPORT_FAILED, Backend, BackendConfig, TranslationRecord, make_backend, translate_batch
from .metrics import AVERAGING, ChrfParams, chrf_corpus, chrf_sentence, example_similarity
from .prompting import BASELINE, ShotMode, load_template, render, segment_seed, select_examples
from .retrieval import BM25Params, RetrievalIndex, build_index, load_index

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
DEFAULT_MODES = ("baseline", "rand1", "rand5", "rag1", "rag5")
SEED_RULE = "numpy.random.SeedSequence([seed, segment_index]).generate_state(1)[0], per segment"


@dataclass(frozen=True)
class RunConfig:
    lang: LanguagePair
    mode: ShotMode
    domain: Domain | None = None
    backend: BackendConfig = BackendConfig()
    chrf: ChrfParams = ChrfParams()
    seed: int = 0
    test_set: str | None = None
    index_dir: str | None = None
    corpus: str | None = None
    exclude_exact: bool = False
    chrf_average: str = "micro"
    bm25: BM25Params = BM25Params()
    lang_names: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.mode.kind != "baseline" and self.domain is None:
            raise ValueError(f"{self.mode.label} needs a domain")
        if self.chrf_average not in AVERAGING:
            raise ValueError(f"chrf_average must be one of {AVERAGING}")


@dataclass(frozen=True)
class SegmentResult:
    record: TranslationRecord
    chrf: float
    example_similarity: float | None

    @property
    def hypothesis(self) -> str:
        # failed segments score as empty hypotheses
        return self.record.translation if self.record.status == OK else ""


@dataclass
class ConfigResult:
    config: RunConfig
    corpus_chrf: float
    segments: list[SegmentResult]
    mean_example_similarity: float | None
    failures: dict[str, int]
    shortfall: int = 0

    @property
    def label(self) -> str:
        return self.config.mode.label


def _pool_for(corpus: "Corpus | None", index: "RetrievalIndex | None", domain: Domain):
    if corpus is not None:
        return corpus.pool(domain)
    if index is not None:
        return list(index.store)
    raise ValueError("rand mode needs a corpus or an index to sample from")


def run_config(cfg: RunConfig, *, segments: Sequence[TestSegment] | None = None, index: RetrievalIndex | None = None,
               corpus: Corpus | None = None, backend: Backend | None = None) -> ConfigResult:
    """Select examples, render, translate and score every test segment in order.

    Anything not passed in is loaded from the paths in ``cfg``. Setup
    problems raise; per-segment failures are recorded and scored as empty
    hypotheses.
    """
    if segments is None:
        if cfg.test_set is None:
            raise ValueError("no test set given")
        segments = load_test_set(cfg.test_set)
    if not segments:
        raise ValueError("test set is empty")
    mode = cfg.mode
    if corpus is None and cfg.corpus is not None and mode.kind == "rand":
        corpus = ingest_pairs(cfg.corpus, lang=cfg.lang)
    if index is None and mode.kind == "rag":
        if cfg.index_dir is not None:
            index = load_index(cfg.index_dir)
        elif corpus is not None or cfg.corpus is not None:
            corpus = corpus or ingest_pairs(cfg.corpus, lang=cfg.lang)
            index = build_index(corpus.pool(cfg.domain), cfg.bm25, lang=cfg.lang, domain=cfg.domain)
        else:
            raise ValueError("rag mode needs an index or a corpus")
    pool = _pool_for(corpus, index, cfg.domain) if mode.kind == "rand" else None
    names = dict(cfg.lang_names)

    prompts = []
    for i, seg in enumerate(segments):
        seed = segment_seed(cfg.seed, i) if mode.kind == "rand" else None
        examples = select_examples(mode, seg.src_title, index=index, corpus=pool, domain=cfg.domain,
                                   seed=seed, exclude_exact=cfg.exclude_exact)
        prompts.append(render(mode, seg.src_title, cfg.lang, examples, names, seed))

    records = translate_batch(prompts, cfg.backend, backend)
    results = []
    for seg, rec in zip(segments, records):
        hyp = rec.translation if rec.status == OK else ""
        ex_srcs = [ex.src_text for ex in rec.prompt.examples]
        sim = example_similarity(seg.src_title, ex_srcs, cfg.chrf) if ex_srcs else None
        results.append(SegmentResult(rec, chrf_sentence(hyp, seg.ref_translation, cfg.chrf), sim))

    score = chrf_corpus([(r.hypothesis, s.ref_translation) for r, s in zip(results, segments)],
                        cfg.chrf, cfg.chrf_average)
    sims = [r.example_similarity for r in results if r.example_similarity is not None]
    failures = {OK: 0, PARSE_FAILED: 0, TRANSPORT_FAILED: 0}
    for r in results:
        failures[r.record.status] += 1
    shortfall = sum(1 for r in results if r.record.prompt.shortfall)
    return ConfigResult(cfg, score, results, sum(sims) / len(sims) if sims else None, failures, shortfall)


# -- report sections ----------------------------------------------------------

def _pct(value: float) -> str:
    return f"{value:+.1f}%"


def _check_comparable(results: Sequence[ConfigResult], baseline: ConfigResult) -> None:
    for r in results:
        a, b = r.config, baseline.config
        if (a.lang, a.chrf, a.chrf_average) != (b.lang, b.chrf, b.chrf_average) or len(r.segments) != len(baseline.segments):
            raise ValueError(f"{r.label}/{a.domain}: not comparable with the baseline run")


def delta_table(results: Sequence[ConfigResult], baseline: ConfigResult,
                domains: Sequence[Domain] = GRID_DOMAINS) -> dict:
    """Relative change of corpus chrF versus baseline, mode x domain.

    ``delta_pct = 100 * (chrf - baseline) / baseline``; ``delta_points`` is
    the absolute difference. The baseline row is zero in every column.
    """
    _check_comparable(results, baseline)
    base = baseline.corpus_chrf
    if base == 0:
        raise ValueError("baseline chrF is 0; relative deltas are undefined")

    def cell(score: float) -> dict:
        pct = 100.0 * (score - base) / base
        return {"chrf": round(score, 4), "delta_pct": round(pct, 1), "delta_points": round(score - base, 2),
                "display": _pct(pct)}

    rows = [{"mode": BASELINE.label, "cells": {d.label: {**cell(base), "delta_pct": 0.0, "delta_points": 0.0,
                                                        "display": "+0.0%"} for d in domains}}]
    for mode in _ordered_modes(results):
        cells = {}
        for r in results:
            if r.config.mode == mode and r.config.domain in domains:
                cells[r.config.domain.label] = cell(r.corpus_chrf)
        rows.append({"mode": mode.label, "cells": cells})
    return {"baseline_chrf": round(base, 4), "columns": [d.label for d in domains], "rows": rows}


def similarity_table(results: Sequence[ConfigResult], domains: Sequence[Domain] = GRID_DOMAINS) -> dict:
    """Mean chrF between test titles and their few-shot example sources, mode x domain."""
    rows = []
    for mode in _ordered_modes(results):
        cells = {}
        for r in results:
            if r.config.mode == mode and r.config.domain in domains and r.mean_example_similarity is not None:
                cells[r.config.domain.label] = round(r.mean_example_similarity, 1)
        rows.append({"mode": mode.label, "cells": cells})
    return {"columns": [d.label for d in domains], "rows": rows}


def _ordered_modes(results: Sequence[ConfigResult]) -> list[ShotMode]:
    modes = {r.config.mode for r in results if r.config.mode.kind != "baseline"}
    return sorted(modes, key=lambda m: ({"rand": 0, "rag": 1}[m.kind], m.k))


# -- grid ---------------------------------------------------------------------

@dataclass
class Experiment:
    lang: LanguagePair
    test_set: str
    corpus: str | None = None
    index_dir: str | None = None


@dataclass
class GridConfig:
    experiments: list[Experiment]
    modes: list[ShotMode] = field(default_factory=lambda: [ShotMode.parse(m) for m in DEFAULT_MODES])
    domains: list[Domain] = field(default_factory=lambda: list(GRID_DOMAINS))
    backend: BackendConfig = BackendConfig("mock_copy_best")
    chrf: ChrfParams = ChrfParams()
    chrf_average: str = "micro"
    bm25: BM25Params = BM25Params()
    seed: int = 0
    exclude_exact: bool = False
    lang_names: dict[str, str] = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, obj: dict, base_dir: "Path | str" = ".") -> "GridConfig":
        base_dir = Path(base_dir)
        known = {"experiments", "modes", "domains", "backend", "chrf", "chrf_average", "bm25", "seed",
                 "exclude_exact", "lang_names"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
        if not obj.get("experiments"):
            raise ValueError("grid needs at least one experiment")
        experiments = []
        for e in obj["experiments"]:
            if "lang" not in e or "test_set" not in e:
                raise ValueError("each experiment needs lang and test_set")
            if not e.get("corpus") and not e.get("index_dir"):
                raise ValueError(f"experiment {e['lang']}: needs corpus or index_dir")
            experiments.append(Experiment(LanguagePair.parse(e["lang"]), e["test_set"], e.get("corpus"), e.get("index_dir")))
        return cls(
            experiments=experiments,
            modes=[ShotMode.parse(m) for m in obj.get("modes", DEFAULT_MODES)],
            domains=[Domain.parse(d) for d in obj.get("domains", [d.value for d in GRID_DOMAINS])],
            backend=BackendConfig.from_dict(obj.get("backend", {"kind": "mock_copy_best"}), base_dir),
            chrf=ChrfParams(**obj.get("chrf", {})),
            chrf_average=obj.get("chrf_average", "micro"),
            bm25=BM25Params(**obj.get("bm25", {})),
            seed=int(obj.get("seed", 0)),
            exclude_exact=bool(obj.get("exclude_exact", False)),
            lang_names=dict(obj.get("lang_names") or {}),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path) -> "GridConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            obj = yaml.safe_load(fh)
        if not isinstance(obj, dict):
            raise ValueError(f"{path}: grid file must be a mapping")
        return cls.from_dict(obj, path.parent)

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class GridRun:
    report: dict
    results: dict[str, list[ConfigResult]]  # lang -> results, baseline first
    aborted: list[dict]


def run_grid(grid: GridConfig) -> GridRun:
    """Run every (mode, domain) configuration for every experiment.

    A configuration that fails to set up is recorded as aborted and the
    rest of the grid still runs.
    """
    backend = make_backend(grid.backend)
    all_results: dict[str, list[ConfigResult]] = {}
    aborted: list[dict] = []
    exp_sections, exp_manifests = [], []
    for exp in grid.experiments:
        lang_key = str(exp.lang)
        segments = load_test_set(grid.resolve(exp.test_set))
        corpus = ingest_pairs(grid.resolve(exp.corpus), lang=exp.lang) if exp.corpus else None
        base_cfg = RunConfig(exp.lang, BASELINE, None, grid.backend, grid.chrf, grid.seed,
                             exp.test_set, exp.index_dir, exp.corpus, grid.exclude_exact, grid.chrf_average,
                             grid.bm25, tuple(sorted(grid.lang_names.items())))
        indexes: dict[Domain, RetrievalIndex] = {}
        index_meta = {}

        def index_for(domain: Domain) -> RetrievalIndex:
            if domain not in indexes:
                if exp.index_dir:
                    path = grid.resolve(exp.index_dir) / domain.value.lower()
                    indexes[domain] = load_index(path)
                    index_meta[domain.label] = json.loads((path / "manifest.json").read_text(encoding="utf-8"))["checksums"]
                else:
                    indexes[domain] = build_index(corpus.pool(domain), grid.bm25, lang=exp.lang, domain=domain)
                    index_meta[domain.label] = {"n_docs": indexes[domain].n_docs, "built_from": "corpus"}
            return indexes[domain]

        results: list[ConfigResult] = []
        baseline = None
        for mode in grid.modes:
            for domain in ([None] if mode.kind == "baseline" else grid.domains):
                cfg = replace(base_cfg, mode=mode, domain=domain)
                try:
                    index = index_for(domain) if mode.kind != "baseline" else None
                    res = run_config(cfg, segments=segments, index=index, corpus=corpus, backend=backend)
                except Exception as exc:  # noqa: BLE001 - one bad config must not sink the grid
                    logger.error("%s %s %s aborted: %s", lang_key, mode.label, domain.label if domain else "-", exc)
                    aborted.append({"lang": lang_key, "mode": mode.label, "domain": domain.label if domain else None,
                                    "error": f"{type(exc).__name__}: {exc}"})
                    continue
                if mode.kind == "baseline":
                    baseline = res
                results.append(res)
        all_results[lang_key] = results
        others = [r for r in results if r is not baseline]
        section = {"lang": lang_key.upper(), "n_segments": len(segments)}
        if baseline is not None:
            try:
                section["delta_table"] = delta_table(others, baseline, grid.domains)
            except ValueError as exc:
                aborted.append({"lang": lang_key, "mode": "delta table", "domain": None, "error": str(exc)})
        section["similarity_table"] = similarity_table(others, grid.domains)
        section["configs"] = [_config_summary(r) for r in results]
        exp_sections.append(section)
        exp_manifests.append({
            "lang": lang_key,
            "test_set": {"path": exp.test_set, "sha256": _sha256_file(grid.resolve(exp.test_set))},
            "corpus": ({"path": exp.corpus, "sha256": _sha256_file(grid.resolve(exp.corpus))} if exp.corpus else None),
            "index_dir": exp.index_dir,
            "indexes": dict(sorted(index_meta.items())),
        })

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "manifest": _manifest(grid, exp_manifests),
        "experiments": exp_sections,
        "aborted": aborted,
    }
    return GridRun(report, all_results, aborted)


def _config_summary(r: ConfigResult) -> dict:
    c = r.config
    return {
        "mode": c.mode.label,
        "domain": c.domain.label if c.domain else None,
        "template_id": c.mode.template_id,
        "corpus_chrf": round(r.corpus_chrf, 4),
        "mean_example_similarity": None if r.mean_example_similarity is None else round(r.mean_example_similarity, 4),
        "failures": r.failures,
        "shortfall_segments": r.shortfall,
    }


def _manifest(grid: GridConfig, experiments: list[dict]) -> dict:
    templates = {tid: hashlib.sha256(load_template(tid).encode("utf-8")).hexdigest() for tid in ("A", "B")}
    return {
        "tool": "ragmt",
        "version": __version__,
        "seed": grid.seed,
        "rand_seed_rule": SEED_RULE,
        "modes": [{"mode": m.label, "template_id": m.template_id} for m in grid.modes],
        "domains": [d.label for d in grid.domains],
        "chrf": {**grid.chrf.to_json(), "average": grid.chrf_average},
        "bm25": {"k1": grid.bm25.k1, "b": grid.bm25.b},
        "backend": {k: v for k, v in grid.backend.to_json().items() if k != "script"}
                   | {"script": Path(grid.backend.script).name if grid.backend.script else None},
        "exclude_exact": grid.exclude_exact,
        "templates_sha256": templates,
        "experiments": experiments,
    }


# -- rendering ----------------------------------------------------------------

def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = lambda cells: "| " + " | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))) + " |"  # noqa: E731
    sep = "|" + "|".join(("-" * (w + 1)) + ":" if i else ":" + "-" * (w + 1) for i, w in enumerate(widths)) + "|"
    return [line(header), sep] + [line(r) for r in rows]


def render_markdown(report: dict) -> str:
    """Human-readable report: delta table, absolute scores, similarity table."""
    out = ["# Title translation evaluation", ""]
    m = report["manifest"]
    out.append(f"seed {m['seed']} | backend {m['backend']['kind']} | chrF max_n={m['chrf']['max_n']} "
               f"beta={m['chrf']['beta']} ({m['chrf']['average']}) | BM25 k1={m['bm25']['k1']} b={m['bm25']['b']}")
    out.append("")
    for exp in report["experiments"]:
        lang = exp["lang"]
        out += [f"## {lang}", "", f"{exp['n_segments']} test segments", ""]
        dt = exp.get("delta_table")
        if dt:
            cols = dt["columns"]
            out += [f"### Delta chrF% against baseline (baseline chrF {dt['baseline_chrf']:.1f})", ""]
            rows = [[r["mode"]] + [r["cells"][c]["display"] if c in r["cells"] else "n/a" for c in cols] for r in dt["rows"]]
            out += _md_table([lang] + cols, rows) + [""]
            out += ["### Corpus chrF (delta points)", ""]
            rows = [[r["mode"]] + [f"{r['cells'][c]['chrf']:.1f} ({r['cells'][c]['delta_points']:+.1f})"
                                   if c in r["cells"] else "n/a" for c in cols] for r in dt["rows"]]
            out += _md_table([lang] + cols, rows) + [""]
        st = exp["similarity_table"]
        if st["rows"]:
            cols = st["columns"]
            out += ["### chrF similarity between test titles and few-shot example sources", ""]
            rows = [[r["mode"]] + [f"{r['cells'][c]:.1f}" if c in r["cells"] else "n/a" for c in cols] for r in st["rows"]]
            out += _md_table([lang] + cols, rows) + [""]
        flagged = [c for c in exp["configs"] if c["failures"][OK] != sum(c["failures"].values()) or c["shortfall_segments"]]
        if flagged:
            out += ["### Flagged configurations", ""]
            rows = [[c["mode"], c["domain"] or "-", str(c["failures"][PARSE_FAILED]), str(c["failures"][TRANSPORT_FAILED]),
                     str(c["shortfall_segments"])] for c in flagged]
            out += _md_table(["config", "domain", "parse_failed", "transport_failed", "shortfall"], rows) + [""]
    if report["aborted"]:
        out += ["## Aborted", ""]
        out += [f"- {a['lang']} {a['mode']} {a['domain'] or '-'}: {a['error']}" for a in report["aborted"]] + [""]
    return "\n".join(out)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=False) + "\n"


def segment_rows(run: GridRun) -> list[dict]:
    rows = []
    for lang, results in run.results.items():
        for r in results:
            for seg in r.segments:
                rec = seg.record
                rows.append({
                    "lang": lang,
                    "mode": r.config.mode.label,
                    "domain": r.config.domain.label if r.config.domain else None,
                    "segment": rec.segment_index,
                    "status": rec.status,
                    "translation": rec.translation,
                    "example_ids": list(rec.prompt.example_ids),
                    "chrf": round(seg.chrf, 4),
                    "example_similarity": None if seg.example_similarity is None else round(seg.example_similarity, 4),
                })
    return rows


def write_reports(run: GridRun, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"json": out_dir / "report.json", "markdown": out_dir / "report.md", "segments": out_dir / "segments.jsonl"}
    paths["json"].write_text(dump_json(run.report), encoding="utf-8")
    paths["markdown"].write_text(render_markdown(run.report), encoding="utf-8")
    with open(paths["segments"], "w", encoding="utf-8", newline="\n") as fh:
        for row in segment_rows(run):
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return paths
