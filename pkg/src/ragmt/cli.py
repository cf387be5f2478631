"""``ragmt`` command line.

Subcommands: build-index, add, search, translate, evaluate, report, synth.
A ``--config`` YAML/JSON file may hold defaults under a key per subcommand
(``build-index: {lang: en-de, k1: 1.5}``); flags override it. The effective
configuration is echoed to stderr as one JSON line.

Exit codes: 0 success, 1 setup or config error, 2 translation contract failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import __version__
from .corpus import CorpusError, Domain, ingest_pairs
from .harness import GridConfig, render_markdown, run_grid, write_reports
from .llm import OK, BackendConfig, KINDS, translate
from .prompting import PromptError, ShotMode, render, segment_seed, select_examples
from .retrieval import BM25Params, IndexFormatError, build_index, load_index, save_index

JSON_SCHEMA_VERSION = 1
EXIT_OK, EXIT_SETUP, EXIT_TRANSLATION = 0, 1, 2



class SetupError(Exception):
    pass


def _load_mapping(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise SetupError(f"cannot read {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise SetupError(f"{path}: expected a mapping")
    return obj


def _effective(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge config-file section and flags; flags win when given."""
    section = {}
    if args.config:
        section = _load_mapping(args.config).get(args.command, {}) or {}
    merged = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key.replace("_", "-") in section:
            merged[key] = section[key.replace("_", "-")]
        else:
            merged[key] = section.get(key, default)
    print(json.dumps({"command": args.command, "effective_config": merged}, ensure_ascii=False, default=str),
          file=sys.stderr)
    return merged


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise SetupError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _backend(spec) -> BackendConfig:
    if isinstance(spec, dict):
        return BackendConfig.from_dict(spec)
    if spec in KINDS:
        return BackendConfig(kind=spec)
    path = Path(spec)
    return BackendConfig.from_dict(_load_mapping(path), path.parent)


# -- subcommands --------------------------------------------------------------

def cmd_build_index(args) -> int:
    cfg = _effective(args, {"corpus": None, "lang": None, "domain": "tbd", "out": None, "k1": 1.2, "b": 0.75,
                            "format": "jsonl", "strict": False})
    _require(cfg, "corpus", "lang", "out")
    corpus = ingest_pairs(cfg["corpus"], cfg["format"], cfg["lang"], strict=bool(cfg["strict"]))
    domain = Domain.parse(cfg["domain"])
    index = build_index(corpus.pool(domain), BM25Params(float(cfg["k1"]), float(cfg["b"])),
                        lang=corpus.lang, domain=domain)
    save_index(index, cfg["out"])
    print(f"n_docs={index.n_docs} avg_doc_len={index.avg_doc_len:.4f} terms={index.vocabulary_size} "
          f"malformed={corpus.malformed} out={cfg['out']}")
    return EXIT_OK


def cmd_add(args) -> int:
    cfg = _effective(args, {"index": None, "corpus": None, "format": "jsonl", "strict": False})
    _require(cfg, "index", "corpus")
    index = load_index(cfg["index"])
    corpus = ingest_pairs(cfg["corpus"], cfg["format"], index.lang, strict=bool(cfg["strict"]))
    pairs = corpus.pool(index.domain) if index.domain else list(corpus)
    for pair in pairs:
        index.add(pair)
    save_index(index, cfg["index"])
    print(f"added={len(pairs)} n_docs={index.n_docs} avg_doc_len={index.avg_doc_len:.4f}")
    return EXIT_OK


def cmd_search(args) -> int:
    cfg = _effective(args, {"index": None, "query": None, "k": 5, "json": False})
    _require(cfg, "index", "query")
    index = load_index(cfg["index"])
    hits = index.search(cfg["query"], int(cfg["k"]))
    if cfg["json"]:
        print(json.dumps({
            "schema_version": JSON_SCHEMA_VERSION,
            "query": cfg["query"],
            "k": int(cfg["k"]),
            "hits": [{"rank": h.rank, "score": h.score, "doc_id": h.doc_id, "id": h.pair.id,
                      "domain": h.pair.domain.value, "src_text": h.pair.src_text, "tgt_text": h.pair.tgt_text}
                     for h in hits],
        }, ensure_ascii=False))
    else:
        for h in hits:
            print(f"{h.rank}\t{h.score:.6f}\t{h.pair.src_text}\t{h.pair.tgt_text}")
    return EXIT_OK


def cmd_translate(args) -> int:
    cfg = _effective(args, {"index": None, "title": None, "lang": None, "mode": "rag", "k": 5,
                            "backend": "mock_echo", "seed": 0, "show_prompt": False, "json": False})
    _require(cfg, "title")
    mode = ShotMode.parse(cfg["mode"], None if cfg["mode"] == "baseline" else int(cfg["k"]))
    index = None
    if cfg["index"]:
        index = load_index(cfg["index"])
    elif mode.kind != "baseline":
        raise SetupError(f"--mode {mode.kind} needs --index")
    lang = index.lang if index is not None else cfg["lang"]
    if lang is None:
        raise SetupError("--lang is required without --index")
    backend = _backend(cfg["backend"])
    seed = segment_seed(int(cfg["seed"]), 0) if mode.kind == "rand" else None
    examples = select_examples(mode, cfg["title"], index=index, corpus=index.store if index else None,
                               domain=index.domain if index else None, seed=seed)
    prompt = render(mode, cfg["title"], lang, examples, seed=seed)
    if cfg["show_prompt"]:
        print(prompt.text)
        print()
    record = translate(prompt, backend)
    if cfg["json"]:
        print(json.dumps({"schema_version": JSON_SCHEMA_VERSION, "status": record.status,
                          "translation": record.translation, "template_id": prompt.template_id,
                          "example_ids": list(prompt.example_ids), "attempts": record.attempts},
                         ensure_ascii=False))
    elif record.status == OK:
        print(record.translation)
    if record.status != OK:
        print(f"translation {record.status}: {record.error}", file=sys.stderr)
        print(record.raw_response, file=sys.stderr)
        return EXIT_TRANSLATION
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _effective(args, {"grid": None, "out": None})
    _require(cfg, "grid", "out")
    try:
        grid = GridConfig.load(cfg["grid"])
    except (ValueError, TypeError) as exc:
        raise SetupError(f"{cfg['grid']}: {exc}") from exc
    run = run_grid(grid)
    paths = write_reports(run, cfg["out"])
    print(render_markdown(run.report))
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}", file=sys.stderr)
    return EXIT_SETUP if run.aborted else EXIT_OK


def cmd_report(args) -> int:
    cfg = _effective(args, {"input": None, "out": None})
    _require(cfg, "input")
    try:
        report = json.loads(Path(cfg["input"]).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SetupError(f"cannot read report {cfg['input']}: {exc}") from exc
    text = render_markdown(report)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import write_synthetic

    cfg = _effective(args, {"out": None, "seed": 0, "pairs": 2000, "test": 200, "lang": "en-de"})
    _require(cfg, "out")
    paths = write_synthetic(cfg["out"], int(cfg["seed"]), int(cfg["pairs"]), int(cfg["test"]), cfg["lang"])
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragmt", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"ragmt {__version__}")
    parser.add_argument("--config", help="YAML/JSON file with per-subcommand defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="index a bilingual corpus")
    p.add_argument("--corpus")
    p.add_argument("--lang", help="SRC-TGT, e.g. en-de")
    p.add_argument("--domain", choices=["ttl", "bp", "pd", "tbd"])
    p.add_argument("--out")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--format", choices=["jsonl", "tsv"])
    p.add_argument("--strict", action="store_true", default=None)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("add", help="add pairs to an existing index")
    p.add_argument("--index")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["jsonl", "tsv"])
    p.add_argument("--strict", action="store_true", default=None)
    p.set_defaults(func=cmd_add)

    p = sub.add_parser("search", help="top-k BM25 search")
    p.add_argument("--index")
    p.add_argument("--query")
    p.add_argument("--k", type=int)
    p.add_argument("--json", action="store_true", default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("translate", help="translate one title")
    p.add_argument("--index")
    p.add_argument("--title")
    p.add_argument("--lang", help="needed only without --index")
    p.add_argument("--mode", choices=["baseline", "rand", "rag"])
    p.add_argument("--k", type=int)
    p.add_argument("--backend", help=f"backend kind ({', '.join(KINDS)}) or backend config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--show-prompt", dest="show_prompt", action="store_true", default=None)
    p.add_argument("--json", action="store_true", default=None)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="run an experiment grid")
    p.add_argument("--grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render Markdown from report.json")
    p.add_argument("--input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a synthetic corpus, test set and grid")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--lang")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SetupError, CorpusError, IndexFormatError, PromptError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SETUP


if __name__ == "__main__":
    sys.exit(main())
