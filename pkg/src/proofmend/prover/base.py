from __future__ import annotations

import re
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import List, Optional, Protocol, Sequence, Tuple, Union

from ..script import Sentence, sentence


class ProverError(Exception):
    pass


class BackendUnavailable(ProverError):
    pass


class TheoremRejected(ProverError):
    pass


class NothingToUndo(ProverError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    names: Tuple[str, ...]
    type_text: str

    @classmethod
    def parse(cls, text: str) -> "Hypothesis":
        """Parse the displayed form ``"n, m : nat"``."""
        names, sep, type_text = text.partition(":")
        if not sep:
            raise ValueError(f"not a hypothesis: {text!r}")
        parsed = tuple(n.strip() for n in names.split(",") if n.strip())
        if not parsed:
            raise ValueError(f"hypothesis without a name: {text!r}")
        return cls(parsed, type_text.strip())

    def __str__(self) -> str:
        return f"{', '.join(self.names)} : {self.type_text}"


@dataclass(frozen=True)
class Goal:
    hypotheses: Tuple[Hypothesis, ...]
    conclusion: str
    id: str = ""

    @property
    def names(self) -> List[str]:
        return [n for h in self.hypotheses for n in h.names]

    def __str__(self) -> str:
        lines = [str(h) for h in self.hypotheses]
        lines.append("=" * 28)
        lines.append(self.conclusion)
        return "\n".join(lines)


@dataclass(frozen=True)
class ProofState:
    """Focused goals after ``depth`` executed sentences.

    ``unfocused`` counts goals hidden by bullet focusing; ``key`` is a
    backend-specific identifier of the state (mock state id, toplevel
    state number).
    """

    goals: Tuple[Goal, ...]
    depth: int = 0
    unfocused: int = 0
    key: Optional[str] = None

    @property
    def focused(self) -> Optional[Goal]:
        return self.goals[0] if self.goals else None

    @property
    def solved(self) -> bool:
        return not self.goals and self.unfocused == 0


@dataclass(frozen=True)
class StepResult:
    state: Optional[ProofState] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @classmethod
    def advanced(cls, state: ProofState) -> "StepResult":
        return cls(state=state)

    @classmethod
    def failed(cls, error: str) -> "StepResult":
        return cls(error=error)


_HEADER_RE = re.compile(
    r"^\s*(Theorem|Lemma|Remark|Fact|Corollary|Proposition|Example|Goal)\s+"
    r"(?P<name>[A-Za-z_][\w']*)?(?P<rest>.*)$",
    re.S,
)


def _top_level_colon(text: str) -> Optional[int]:
    depth = 0
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == ":" and depth == 0:
            return i
    return None


def parse_header(statement: str) -> Tuple[str, str]:
    """Split ``Theorem name binders : body.`` into (name, body)."""
    m = _HEADER_RE.match(statement)
    if not m:
        raise TheoremRejected(f"not a theorem header: {statement!r}")
    name = m.group("name") or ""
    rest = m.group("rest").strip()
    if rest.endswith("."):
        rest = rest[:-1].rstrip()
    if not rest.startswith(":"):
        # Binders before the colon stay part of the body as a forall.
        colon = _top_level_colon(rest)
        if colon is None or not rest[colon + 1:].strip():
            raise TheoremRejected(f"missing statement body: {statement!r}")
        return name, f"forall {rest[:colon].strip()}, {rest[colon + 1:].strip()}"
    body = rest[1:].strip()
    if not body:
        raise TheoremRejected(f"missing statement body: {statement!r}")
    return name, body


class Session(ABC):
    """A live proof attempt for one theorem.

    Subclasses implement :meth:`_step` and :meth:`_restore`; history
    bookkeeping, failure purity and timing live here.
    """

    def __init__(self, name: str, statement: str, initial: ProofState) -> None:
        self.name = name
        self.statement = statement
        self.initial = initial
        self.history: List[Tuple[Sentence, ProofState]] = []
        self.prover_time = 0.0
        self.hammer_time = 0.0
        self.hammer_calls = 0
        self._in_hammer = False

    @property
    def state(self) -> ProofState:
        return self.history[-1][1] if self.history else self.initial

    @property
    def depth(self) -> int:
        return len(self.history)

    def state_key(self):
        return self.state.key if self.state.key is not None else self.depth

    def execute(self, s: Union[Sentence, str], timeout: Optional[float] = None) -> StepResult:
        if isinstance(s, str):
            s = sentence(s)
        t0 = time.perf_counter()
        try:
            outcome = self._step(s, timeout)
        finally:
            if not self._in_hammer:
                self.prover_time += time.perf_counter() - t0
        if isinstance(outcome, str):
            return StepResult.failed(outcome)
        outcome = replace(outcome, depth=len(self.history) + 1)
        self.history.append((s, outcome))
        return StepResult.advanced(outcome)

    def undo(self) -> ProofState:
        if not self.history:
            raise NothingToUndo("no executed sentence to undo")
        self.history.pop()
        previous = self.state
        self._restore(previous)
        return previous

    def is_complete(self) -> bool:
        return self.state.solved

    def try_hammer(self, hints: Sequence[str] = (), timeout: float = 10.0) -> Optional[List[Sentence]]:
        """Close the focused goal with automation, or leave the state unchanged."""
        if timeout <= 0:
            raise ValueError("hammer timeout must be positive")
        if not self.state.goals:
            return None
        self.hammer_calls += 1
        t0 = time.perf_counter()
        self._in_hammer = True
        try:
            return self._hammer(list(hints), timeout)
        finally:
            self._in_hammer = False
            self.hammer_time += time.perf_counter() - t0

    hammer_candidates: Tuple[str, ...] = ("hfcrush use: {hints}.", "hammer.", "auto.", "easy.")

    def _hammer(self, hints: List[str], timeout: float) -> Optional[List[Sentence]]:
        before = self.state
        for template in self.hammer_candidates:
            text = template.replace(" use: {hints}", f" use: {', '.join(hints)}" if hints else "")
            s = sentence(text)
            result = self.execute(s, timeout=timeout)
            if not result.ok:
                continue
            if closes_focused_goal(before, result.state):
                return [s]
            self.undo()
        return None

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @abstractmethod
    def _step(self, s: Sentence, timeout: Optional[float]) -> Union[ProofState, str]:
        """Run one sentence; return the new state or the error text."""

    @abstractmethod
    def _restore(self, state: ProofState) -> None:
        """Return the backend to ``state`` after the history was popped."""


def closes_focused_goal(before: ProofState, after: ProofState) -> bool:
    """Automation that leaves the goal in place does not count as success."""
    return len(after.goals) < len(before.goals) or after.solved


class Backend(Protocol):
    def start_session(self, statement: str, env=None) -> Session:
        ...
