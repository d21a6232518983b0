"""Command-line entry point: ``proofmend {prove,bench,classify,retrieve}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .errors import ErrorCategory, category_histogram, classify, render_histogram
from .genai import ChatCompletionClient, MockModelClient, ModelError
from .orchestrator import ConfigError, ProveConfig, TheoremRecord, load_dataset, prove, run_benchmark
from .prover.base import ProverError
from .prover.coqtop import CoqtopBackend
from .prover.mock import MockBackend, TranscriptError
from .retrieval import Corpus, DuplicateName, retrieve_premises
from .script import ScriptSyntaxError, sentence

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("proofmend")


def demo_path(*parts: str) -> Path:
    return Path(str(resources.files("proofmend.data").joinpath("demo", *parts)))


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", type=Path, default=None, help="JSONL theorem records (default: bundled demo)")
    p.add_argument("--premises", type=Path, default=None, help="JSONL premise corpus")
    p.add_argument("--backend", choices=["mock", "subprocess"], default="mock")
    p.add_argument("--model", choices=["mock", "remote"], default="mock")
    p.add_argument("--transcripts", type=Path, default=None, help="mock backend transcript directory")
    p.add_argument("--replies", type=Path, default=None, help="mock model replies (JSON: name -> text)")
    p.add_argument("--k", type=int, default=50, help="KNN candidates before reranking")
    p.add_argument("--prompt-budget", type=int, default=10, help="premises placed in the prompt")
    p.add_argument("--hammer-timeout", type=float, default=10.0)
    p.add_argument("--max-replacements", type=int, default=10)
    p.add_argument("--time-budget", type=float, default=600.0)
    p.add_argument("--retrieval", choices=["statement", "usage"], default="statement")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--disable", action="append", default=[],
                   help="ablation: reference, rename, bullet, augment or backtrack (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proofmend", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="prove one theorem")
    _config_args(p)
    p.add_argument("--theorem", required=True, help="theorem name in the dataset")
    p.add_argument("--events", type=Path, default=None, help="write the event log here (JSON lines)")

    b = sub.add_parser("bench", help="prove every theorem in a dataset")
    _config_args(b)
    b.add_argument("--parallel", type=int, default=1)
    b.add_argument("--results", type=Path, default=None, help="incremental per-theorem results (JSONL, resumable)")
    b.add_argument("--report", type=Path, default=None, help="write the JSON report here")

    c = sub.add_parser("classify", help="error histogram of a log")
    c.add_argument("log", type=Path, help="JSONL of {error, sentence} objects or of benchmark results")
    c.add_argument("--no-unknown", action="store_true", help="leave Unknown out of the table")

    r = sub.add_parser("retrieve", help="rank premises for a statement")
    r.add_argument("--statement", required=True)
    r.add_argument("--premises", type=Path, default=None)
    r.add_argument("--k", type=int, default=5, help="number of names to print")
    r.add_argument("--candidates", type=int, default=50, help="KNN candidates before reranking")
    r.add_argument("--retrieval", choices=["statement", "usage"], default="statement")
    return parser


def _make_config(args) -> ProveConfig:
    return ProveConfig(
        backend=args.backend, model=args.model, k=args.k, prompt_budget=args.prompt_budget,
        hammer_timeout=args.hammer_timeout, max_replacements=args.max_replacements,
        time_budget=args.time_budget, retrieval=args.retrieval, temperature=args.temperature,
        disabled=frozenset(args.disable),
    )


def _make_backend(args):
    if args.backend == "mock":
        return MockBackend.from_dir(args.transcripts or demo_path("transcripts"))
    return CoqtopBackend()


def _make_model(args):
    if args.model == "mock":
        return MockModelClient.from_file(args.replies or demo_path("replies.json"))
    return ChatCompletionClient.from_env()


def _dataset_path(args) -> Path:
    path = args.dataset or demo_path("dataset.jsonl")
    if not path.is_file():
        raise ConfigError(f"dataset not found: {path}")
    return path


class _Envs:
    """Premise corpora, loaded once per file."""

    def __init__(self, default: Optional[Path], base: Path) -> None:
        self.default = default
        self.base = base
        self.cache = {}

    def get(self, record: TheoremRecord) -> Optional[Corpus]:
        if self.default is not None:
            path = self.default
        elif record.premises_file:
            path = self.base / record.premises_file
        else:
            return None
        if path not in self.cache:
            if not path.is_file():
                raise ConfigError(f"premise file not found: {path}")
            self.cache[path] = Corpus.load(path)
        return self.cache[path]


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def cmd_prove(args) -> int:
    cfg = _make_config(args)
    path = _dataset_path(args)
    records = {r.name: r for r in load_dataset(path)}
    if args.theorem not in records:
        raise ConfigError(f"theorem {args.theorem!r} not in {path}")
    record = records[args.theorem]
    envs = _Envs(args.premises, path.parent)
    result = prove(record, envs.get(record), cfg, backend=_make_backend(args), model=_make_model(args))
    if args.events:
        _write_jsonl(args.events, result.events)
    if result.proved:
        print(result.final_script.render())
        return EXIT_OK
    print(f"{result.name}: Failed ({result.reason})", file=sys.stderr)
    return EXIT_FAILED


def cmd_bench(args) -> int:
    cfg = _make_config(args)
    path = _dataset_path(args)
    dataset = load_dataset(path)
    if not dataset:
        raise ConfigError(f"dataset is empty: {path}")
    envs = _Envs(args.premises, path.parent)
    for record in dataset:
        envs.get(record)
    backend, model = _make_backend(args), _make_model(args)
    report = run_benchmark(
        dataset, cfg, parallelism=args.parallel, results_path=args.results,
        prove_one=lambda t: prove(t, envs.get(t), cfg, backend=backend, model=model),
    )
    if args.report:
        args.report.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(report.summary())
    return EXIT_OK


def _log_events(path: Path):
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{n}: {e}") from None
            yield from row.get("events", [row])


def cmd_classify(args) -> int:
    if not args.log.is_file():
        raise ConfigError(f"log not found: {args.log}")
    categories: List[ErrorCategory] = []
    for event in _log_events(args.log):
        if "error" not in event:
            continue
        raw = event.get("sentence") or "idtac."
        try:
            failing = sentence(raw)
        except ScriptSyntaxError:
            failing = sentence("idtac.")
        categories.append(classify(event["error"], failing).category)
    print(render_histogram(category_histogram(categories), include_unknown=not args.no_unknown))
    return EXIT_OK


def cmd_retrieve(args) -> int:
    if args.k <= 0 or args.candidates <= 0:
        raise ConfigError("--k and --candidates must be positive")
    path = args.premises or demo_path("premises.jsonl")
    if not path.is_file():
        raise ConfigError(f"premise file not found: {path}")
    corpus = Corpus.load(path)
    ranked = retrieve_premises(corpus, args.statement, max(args.k, args.candidates), args.k, args.retrieval)
    for r in ranked:
        print(f"{r.name}\t{r.knn_score:.4f}\t{r.bm25_score:.4f}")
    return EXIT_OK


COMMANDS = {"prove": cmd_prove, "bench": cmd_bench, "classify": cmd_classify, "retrieve": cmd_retrieve}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TranscriptError, DuplicateName, ModelError, ProverError, OSError, KeyError) as e:
        print(f"proofmend: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
