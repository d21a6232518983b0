"""Hammer-driven backtracking over the stack of executed sentences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from .prover.base import NothingToUndo, ProofState, ProverError, Session
from .script import Kind, Sentence


class TraceDesync(RuntimeError):
    """The trace and the session history disagree."""


class NoRoot(LookupError):
    pass


def bullet_level(stack: Tuple[str, ...], s: Sentence) -> Tuple[Tuple[str, ...], int]:
    """Bullet stack after ``s`` and the nesting level ``s`` runs at."""
    if s.kind is Kind.BULLET:
        if s.raw in stack:
            idx = stack.index(s.raw)
            return stack[: idx + 1], idx + 1
        stack = stack + (s.raw,)
        return stack, len(stack)
    if s.kind is Kind.BRACE_OPEN:
        stack = stack + ("{",)
        return stack, len(stack)
    if s.kind is Kind.BRACE_CLOSE:
        if "{" in stack:
            idx = len(stack) - 1 - stack[::-1].index("{")
            stack = stack[:idx]
        return stack, len(stack)
    return stack, len(stack)


@dataclass(frozen=True)
class TraceEntry:
    sentence: Sentence
    pre_state_depth: int
    produced_goals: int
    bullet_depth: int
    bullets: Tuple[str, ...] = field(default=(), compare=False)

    @property
    def is_bullet(self) -> bool:
        return self.sentence.kind is Kind.BULLET


class ExecutionTrace:
    """Successfully executed sentences, mirrored one-to-one with the session history."""

    def __init__(self) -> None:
        self.entries: List[TraceEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def accepted(self) -> List[Sentence]:
        return [e.sentence for e in self.entries]

    @property
    def bullets(self) -> Tuple[str, ...]:
        return self.entries[-1].bullets if self.entries else ()

    @property
    def last(self) -> Optional[TraceEntry]:
        return self.entries[-1] if self.entries else None

    def push(self, s: Sentence, pre: ProofState, post: ProofState) -> TraceEntry:
        stack, level = bullet_level(self.bullets, s)
        if s.kind is Kind.TACTIC:
            produced = len(post.goals) - len(pre.goals) + 1
        else:
            produced = 1 if s.kind is Kind.BULLET else 0
        entry = TraceEntry(s, pre.depth, max(produced, 0), level, stack)
        self.entries.append(entry)
        return entry

    def pop(self) -> TraceEntry:
        return self.entries.pop()

    def sync(self, session: Session) -> List[TraceEntry]:
        """Record history frames the session gained since the last sync."""
        if len(self.entries) > session.depth:
            raise TraceDesync(f"trace depth {len(self.entries)} > session depth {session.depth}")
        added = []
        for i in range(len(self.entries), session.depth):
            pre = session.history[i - 1][1] if i else session.initial
            s, post = session.history[i]
            added.append(self.push(s, pre, post))
        return added


def find_root(trace: ExecutionTrace) -> int:
    """Index of the tactic that produced the goal the last bullet focuses."""
    last = trace.last
    if last is None or not last.is_bullet:
        raise NoRoot("last entry is not a bullet")
    want = last.bullet_depth - 1
    for i in range(len(trace.entries) - 2, -1, -1):
        e = trace.entries[i]
        if e.sentence.kind is Kind.TACTIC and e.produced_goals > 1 and e.bullet_depth == want:
            return i
    raise NoRoot(f"no multi-goal tactic at bullet depth {want}")


def discard_subtree(session: Session, trace: ExecutionTrace, root_index: int) -> List[Sentence]:
    if not 0 <= root_index < len(trace):
        raise IndexError(f"root index {root_index} outside trace of length {len(trace)}")
    removed = []
    while len(trace) > root_index:
        try:
            session.undo()
        except NothingToUndo as e:
            raise TraceDesync(str(e)) from e
        removed.append(trace.pop().sentence)
    removed.reverse()
    return removed


@dataclass
class HammerConfig:
    timeout: float = 10.0
    hints: Sequence[str] = ()


def backtrack(session: Session, trace: ExecutionTrace, hammer: Optional[HammerConfig] = None,
              steps: Optional[list] = None,
              should_stop: Optional[Callable[[], bool]] = None) -> Optional[List[Sentence]]:
    """Undo towards the root of the proof until the hammer closes a goal.

    Returns the hammer's proof (already executed and recorded on the
    trace) or None once no executed sentence remains. ``steps`` receives
    one dict per action for the event log.
    """
    hammer = hammer or HammerConfig()
    log = steps if steps is not None else []
    tried = set()
    if len(trace) != session.depth:
        raise TraceDesync(f"trace depth {len(trace)} != session depth {session.depth}")
    try:
        while len(trace) > 0:
            if should_stop is not None and should_stop():
                log.append({"action": "budget_exhausted"})
                return None
            key = session.state_key()
            if key not in tried and session.state.goals:
                tried.add(key)
                proof = session.try_hammer(hammer.hints, hammer.timeout)
                if proof is not None:
                    trace.sync(session)
                    log.append({"action": "hammer_success", "state": str(key),
                                "proof": [s.raw for s in proof]})
                    return proof
                log.append({"action": "hammer_fail", "state": str(key)})
            last = trace.last
            if last.is_bullet:
                try:
                    root = find_root(trace)
                except NoRoot:
                    session.undo()
                    trace.pop()
                    log.append({"action": "undo", "sentence": last.sentence.raw, "note": "no root"})
                    continue
                log.append({"action": "bullet_hit", "sentence": last.sentence.raw})
                removed = discard_subtree(session, trace, root)
                log.append({"action": "discard", "sentences": [s.raw for s in removed]})
            else:
                session.undo()
                trace.pop()
                log.append({"action": "undo", "sentence": last.sentence.raw})
    except ProverError as e:
        log.append({"action": "backend_error", "error": str(e)})
        return None
    log.append({"action": "exhausted"})
    return None
