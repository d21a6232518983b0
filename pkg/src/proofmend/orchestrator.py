"""The generate-then-repair loop for one theorem."""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence

from .backtrack import ExecutionTrace, HammerConfig, backtrack
from .errors import ErrorCategory, category_histogram, classify, render_histogram
from .genai import ModelClient, ModelError, Template, build_prompt
from .prover.base import Backend, BackendUnavailable, ProverError, Session, TheoremRejected
from .repair import DEFAULT_MAX_REPLACEMENTS, Mechanism, RepairContext, RepairStatus, repair
from .retrieval import Corpus, retrieve_premises
from .script import Kind, ProofScript, Sentence, parse_sentence, sentence

log = logging.getLogger(__name__)

ABLATIONS = {
    "reference": Mechanism.REFERENCE_REPLACEMENT,
    "rename": Mechanism.RENAMING,
    "bullet": Mechanism.BULLET_TRANSFORMATION,
    "augment": Mechanism.PREMISE_AUGMENTATION,
}
_FORBIDDEN_TACTICS = {"admit", "give_up"}


class ConfigError(ValueError):
    pass


class Status(enum.Enum):
    PROVED = "Proved"
    FAILED = "Failed"


@dataclass
class ProveConfig:
    backend: str = "mock"
    model: str = "mock"
    k: int = 50
    prompt_budget: int = 10
    hammer_timeout: float = 10.0
    max_replacements: int = DEFAULT_MAX_REPLACEMENTS
    time_budget: float = 600.0
    retrieval: str = "statement"
    temperature: Optional[float] = None
    max_tokens: int = 2048
    disabled: FrozenSet[str] = frozenset()
    verify_replay: bool = True

    def __post_init__(self) -> None:
        for name in ("k", "prompt_budget", "hammer_timeout", "max_replacements", "time_budget", "max_tokens"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.backend not in ("mock", "subprocess"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.model not in ("mock", "remote"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.retrieval not in ("statement", "usage"):
            raise ConfigError(f"unknown retrieval mode {self.retrieval!r}")
        self.disabled = frozenset(self.disabled)
        unknown = self.disabled - set(ABLATIONS) - {"backtrack"}
        if unknown:
            raise ConfigError(f"unknown ablation(s): {', '.join(sorted(unknown))}")

    @property
    def disabled_mechanisms(self) -> FrozenSet[Mechanism]:
        return frozenset(ABLATIONS[d] for d in self.disabled if d in ABLATIONS)


@dataclass(frozen=True)
class TheoremRecord:
    name: str
    statement: str
    project: str = ""
    premises_file: Optional[str] = None
    proof: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "TheoremRecord":
        return cls(data["name"], data["statement"], data.get("project", ""),
                   data.get("premises_file"), data.get("proof"))


@dataclass
class ProofResult:
    name: str
    status: Status
    final_script: Optional[ProofScript] = None
    events: List[dict] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    reason: Optional[str] = None
    model_calls: int = 0
    template_version: str = ""

    @property
    def proved(self) -> bool:
        return self.status is Status.PROVED

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status.value,
            "final_script": self.final_script.render() if self.final_script else None,
            "events": self.events,
            "timings": self.timings,
            "reason": self.reason,
            "model_calls": self.model_calls,
            "template_version": self.template_version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProofResult":
        script = data.get("final_script")
        return cls(
            name=data["name"],
            status=Status(data["status"]),
            final_script=ProofScript.from_text(script) if script else None,
            events=list(data.get("events", [])),
            timings=dict(data.get("timings", {})),
            reason=data.get("reason"),
            model_calls=int(data.get("model_calls", 0)),
            template_version=data.get("template_version", ""),
        )


def replay(script: Sequence[Sentence], statement: str, backend: Backend, env=None) -> bool:
    """Run ``script`` from a fresh session; True iff it ends complete."""
    try:
        session = backend.start_session(statement, env)
    except ProverError:
        return False
    with session:
        for s in script:
            if not session.execute(s).ok:
                return False
        closed = any(s.kind is Kind.QED for s, _ in session.history)
        return closed and session.is_complete()


class _Prover:
    """State for one run of the main loop."""

    def __init__(self, theorem: TheoremRecord, env: Optional[Corpus], cfg: ProveConfig,
                 backend: Backend, model: ModelClient, template: Optional[Template]) -> None:
        self.theorem = theorem
        self.env = env
        self.cfg = cfg
        self.backend = backend
        self.model = model
        self.template = template or Template.load()
        self.events: List[dict] = []
        self.timings = {"total": 0.0, "model": 0.0, "prover": 0.0, "hammer": 0.0, "hammer_invocations": 0}
        self.model_calls = 0
        self.session: Optional[Session] = None
        self.trace = ExecutionTrace()
        self.premises: List[str] = []

    def result(self, status: Status, reason: Optional[str] = None,
               script: Optional[ProofScript] = None) -> ProofResult:
        if self.session is not None:
            self.timings["prover"] = self.session.prover_time
            self.timings["hammer"] = self.session.hammer_time
            self.timings["hammer_invocations"] = self.session.hammer_calls
        return ProofResult(self.theorem.name, status, script, self.events, self.timings, reason,
                           self.model_calls, self.template.version)

    def over_budget(self) -> bool:
        s = self.session
        return s is not None and s.prover_time + s.hammer_time > self.cfg.time_budget

    def run(self) -> ProofResult:
        cfg = self.cfg
        if self.env is not None and len(self.env):
            ranked = retrieve_premises(self.env, self.theorem.statement, cfg.k, cfg.prompt_budget, cfg.retrieval)
        else:
            ranked = []
        self.premises = [r.name for r in ranked]
        prompt = build_prompt(self.theorem.statement, ranked, self.template)
        t0 = time.perf_counter()
        self.model_calls += 1
        try:
            reply = self.model.complete(prompt, cfg.temperature, cfg.max_tokens)
        except ModelError as e:
            return self.result(Status.FAILED, f"model unavailable: {e}")
        finally:
            self.timings["model"] = time.perf_counter() - t0
        self.events.append({"event": "model_query", "premises": self.premises})
        script = reply.extracted
        if script is None:
            return self.result(Status.FAILED, "no proof script in model reply")

        try:
            self.session = self.backend.start_session(self.theorem.statement, self.env)
        except (BackendUnavailable, TheoremRejected) as e:
            return self.result(Status.FAILED, f"{type(e).__name__}: {e}")
        with self.session:
            try:
                return self._loop(list(script.sentences))
            except ProverError as e:
                return self.result(Status.FAILED, f"backend error: {e}")

    def _loop(self, sentences: List[Sentence]) -> ProofResult:
        session, trace = self.session, self.trace
        queue = deque(sentences)
        skipping: Optional[dict] = None
        while queue:
            if self.over_budget():
                return self.result(Status.FAILED, "time budget exceeded")
            s = queue.popleft()
            if skipping is not None:
                if self._skip(s, skipping):
                    self.events.append({"sentence": s.raw, "status": "skipped"})
                    continue
                skipping = None

            if s.kind is Kind.ABORT or _forbidden(s):
                error = f"{s.raw} does not prove the goal"
            else:
                result = session.execute(s)
                if result.ok:
                    trace.sync(session)
                    self.events.append({"sentence": s.raw, "status": "ok"})
                    if s.kind is Kind.QED:
                        break
                    continue
                error = result.error

            pre = session.state
            facts = classify(error, s)
            event = {"sentence": s.raw, "status": "error", "error": error, "category": facts.category.value}
            self.events.append(event)
            if facts.category is not ErrorCategory.UNKNOWN:
                ctx = RepairContext(
                    premise_names=self.premises,
                    hypothesis_names=pre.focused.names if pre.focused else [],
                    max_replacements=self.cfg.max_replacements,
                    timeout=self.cfg.hammer_timeout,
                    disabled=self.cfg.disabled_mechanisms,
                )
                outcome = repair(facts, s, pre, session, ctx)
                event["mechanism"] = outcome.mechanism.value if outcome.mechanism else None
                event["repaired"] = outcome.status.value
                event["attempts"] = outcome.attempts
                if outcome.status is RepairStatus.REPAIRED:
                    event["replacement"] = [r.raw for r in outcome.replacement]
                    trace.sync(session)
                    if any(r.kind is Kind.QED for r in outcome.replacement):
                        break
                    continue
                if outcome.status is RepairStatus.DROPPED:
                    continue
            if "backtrack" in self.cfg.disabled:
                return self.result(Status.FAILED, f"unrepaired error: {error}")
            steps: List[dict] = []
            proof = backtrack(session, trace, HammerConfig(self.cfg.hammer_timeout, self.premises),
                              steps, self.over_budget)
            event["backtrack"] = steps
            if proof is None:
                return self.result(Status.FAILED, f"backtracking failed after: {error}")
            skipping = {"stack": trace.bullets, "deeper": False}
            if s.kind in (Kind.QED, Kind.BULLET, Kind.BRACE_CLOSE):
                queue.appendleft(s)

        if not any(e.sentence.kind is Kind.QED for e in trace.entries):
            # Close a script the model left without Qed.
            if session.execute(sentence("Qed.")).ok:
                trace.sync(session)
                self.events.append({"sentence": "Qed.", "status": "ok", "note": "appended"})
        if not session.is_complete() or not any(e.sentence.kind is Kind.QED for e in trace.entries):
            return self.result(Status.FAILED, "unsolved goals remain")
        final = ProofScript.of(trace.accepted)
        if self.cfg.verify_replay and not replay(final.sentences, self.theorem.statement, self.backend, self.env):
            return self.result(Status.FAILED, "final script did not replay", final)
        return self.result(Status.PROVED, None, final)

    def _skip(self, s: Sentence, state: dict) -> bool:
        """Decide whether ``s`` belongs to a subtree already closed by the hammer."""
        stack = state["stack"]
        if s.kind in (Kind.QED, Kind.ABORT):
            return False
        if s.kind is Kind.BULLET:
            if s.raw in stack:
                return False
            state["deeper"] = True
            return True
        if s.kind is Kind.BRACE_OPEN:
            state["deeper"] = True
            return True
        if s.kind is Kind.BRACE_CLOSE:
            return state["deeper"] or not self.session.state.goals
        if state["deeper"]:
            return True
        return not self.session.state.goals


def _forbidden(s: Sentence) -> bool:
    if s.kind is not Kind.TACTIC:
        return False
    return parse_sentence(s).head in _FORBIDDEN_TACTICS


def prove(theorem: TheoremRecord, env: Optional[Corpus], cfg: ProveConfig, *,
          backend: Backend, model: ModelClient, template: Optional[Template] = None) -> ProofResult:
    t0 = time.perf_counter()
    result = _Prover(theorem, env, cfg, backend, model, template).run()
    result.timings["total"] = time.perf_counter() - t0
    return result


def format_cell(proved: int, attempted: int) -> str:
    """``"4377 (40.4%)"`` style cell."""
    pct = 100.0 * proved / attempted if attempted else 0.0
    return f"{proved} ({pct:.1f}%)"


def event_categories(events: Iterable[dict]) -> List[ErrorCategory]:
    return [ErrorCategory(e["category"]) for e in events if "category" in e]


@dataclass
class BenchmarkReport:
    results: List[ProofResult]

    def __post_init__(self) -> None:
        # Aggregates must not depend on the order workers finished in.
        self.results = sorted(self.results, key=lambda r: r.name)

    @property
    def attempted(self) -> int:
        return len(self.results)

    @property
    def proved(self) -> int:
        return sum(r.proved for r in self.results)

    @property
    def rate(self) -> float:
        return self.proved / self.attempted if self.attempted else 0.0

    @property
    def histogram(self) -> Dict[ErrorCategory, int]:
        return category_histogram(c for r in self.results for c in event_categories(r.events))

    @property
    def timing_totals(self) -> Dict[str, float]:
        keys = ("total", "model", "prover", "hammer", "hammer_invocations")
        totals = {k: sum(r.timings.get(k, 0) for r in self.results) for k in keys}
        totals["mean_total"] = totals["total"] / self.attempted if self.attempted else 0.0
        return totals

    def to_dict(self) -> dict:
        return {
            "aggregate": {"attempted": self.attempted, "proved": self.proved, "rate": self.rate},
            "histogram": {c.value: n for c, n in self.histogram.items()},
            "timings": self.timing_totals,
            "results": [
                {"name": r.name, "status": r.status.value, "reason": r.reason,
                 "final_script": r.final_script.render() if r.final_script else None,
                 "timings": r.timings}
                for r in self.results
            ],
        }

    def summary(self, label: str = "proofmend") -> str:
        width = max(len(label), len("Approach"))
        cell = format_cell(self.proved, self.attempted)
        lines = [
            f"{'Approach':<{width}}  Theorems proved",
            f"{label:<{width}}  {cell}",
            "",
            render_histogram(self.histogram),
            "",
            f"mean time per theorem: {self.timing_totals['mean_total']:.1f}s",
        ]
        return "\n".join(lines)


def load_dataset(path) -> List[TheoremRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(TheoremRecord.from_dict(json.loads(line)))
    return records


def _load_done(path: Path) -> Dict[str, ProofResult]:
    done: Dict[str, ProofResult] = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                result = ProofResult.from_dict(json.loads(line))
            except (ValueError, KeyError):
                # A line cut short by an interrupted run; that theorem is redone.
                log.warning("ignoring unreadable line in %s", path)
                continue
            done[result.name] = result
    return done


def run_benchmark(dataset: Sequence[TheoremRecord], cfg: ProveConfig, *,
                  prove_one: Callable[[TheoremRecord], ProofResult],
                  parallelism: int = 1, results_path=None) -> BenchmarkReport:
    """Prove every theorem, appending each result to ``results_path`` as it lands.

    Theorems already present in ``results_path`` are not attempted again.
    An exception from one theorem becomes a Failed result for it.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    if parallelism < 1:
        raise ConfigError("parallelism must be positive")
    path = Path(results_path) if results_path else None
    done = _load_done(path) if path else {}
    todo = [t for t in dataset if t.name not in done]
    lock = threading.Lock()

    def work(theorem: TheoremRecord) -> ProofResult:
        try:
            result = prove_one(theorem)
        except Exception as e:  # noqa: BLE001 - one theorem must not sink the run
            log.exception("theorem %s crashed", theorem.name)
            result = ProofResult(theorem.name, Status.FAILED, reason=f"{type(e).__name__}: {e}")
        if path is not None:
            line = json.dumps(result.to_dict(), sort_keys=True)
            with lock, open(path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
        return result

    if parallelism == 1:
        fresh = [work(t) for t in todo]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            fresh = list(pool.map(work, todo))
    names = {t.name for t in dataset}
    kept = [r for n, r in done.items() if n in names]
    return BenchmarkReport(kept + fresh)
