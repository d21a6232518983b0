"""Deterministic prover backend replaying a transcript fixture.

A transcript is a JSON document describing one theorem as a state
machine::

    {
      "theorem": "add_comm",
      "statement": "Theorem add_comm : forall n m : nat, n + m = m + n.",
      "initial": "Ca",
      "states": {"Ca": {"goals": [{"hyps": [], "conclusion": "..."}]},
                 "Cd": {"goals": [...], "unfocused": 1}},
      "transitions": {"Ca": {"intros n m.": "Cb",
                             "apply H.": {"error": "..."}}},
      "hammer": {"Cd": {"proof": ["auto."]}, "Cb": "fail"},
      "complete": ["done"]
    }

Transition keys are normalized sentences (trimmed, whitespace runs
collapsed). ``Proof.`` is accepted as a no-op in every state unless the
table says otherwise; ``Qed.`` is accepted exactly in ``complete`` states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from ..script import Kind, Sentence, normalize, sentence
from .base import Goal, Hypothesis, ProofState, Session, TheoremRejected, parse_header

INCOMPLETE_PROOF = "Attempt to save an incomplete proof"


class TranscriptError(ValueError):
    pass


@dataclass
class Transcript:
    theorem: str
    statement: str
    initial: str
    states: Dict[str, ProofState]
    transitions: Dict[str, Dict[str, Union[str, dict]]]
    hammer: Dict[str, Union[str, dict]] = field(default_factory=dict)
    complete: frozenset = frozenset()

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        try:
            states = {
                sid: _parse_state(sid, body) for sid, body in data["states"].items()
            }
            transitions = {
                sid: {normalize(k): v for k, v in table.items()}
                for sid, table in data.get("transitions", {}).items()
            }
            t = cls(
                theorem=data["theorem"],
                statement=data["statement"],
                initial=data["initial"],
                states=states,
                transitions=transitions,
                hammer=dict(data.get("hammer", {})),
                complete=frozenset(data.get("complete", [])),
            )
        except KeyError as e:
            raise TranscriptError(f"transcript missing field {e}") from None
        t.validate()
        return t

    @classmethod
    def load(cls, path) -> "Transcript":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def validate(self) -> None:
        known = set(self.states)
        if self.initial not in known:
            raise TranscriptError(f"{self.theorem}: unknown initial state {self.initial!r}")
        for sid, table in self.transitions.items():
            if sid not in known:
                raise TranscriptError(f"{self.theorem}: transitions from unknown state {sid!r}")
            for key, target in table.items():
                if isinstance(target, str) and target not in known:
                    raise TranscriptError(f"{self.theorem}: {sid!r} --{key}--> unknown state {target!r}")
                if isinstance(target, dict) and "error" not in target:
                    raise TranscriptError(f"{self.theorem}: transition {key!r} needs a target or an error")
        for sid in list(self.hammer) + list(self.complete):
            if sid not in known:
                raise TranscriptError(f"{self.theorem}: unknown state {sid!r}")


def _parse_state(sid: str, body: dict) -> ProofState:
    goals = []
    for i, g in enumerate(body.get("goals", [])):
        hyps = tuple(Hypothesis.parse(h) for h in g.get("hyps", []))
        goals.append(Goal(hyps, g["conclusion"], g.get("id", f"{sid}.{i + 1}")))
    return ProofState(tuple(goals), 0, int(body.get("unfocused", 0)), sid)


class MockSession(Session):
    def __init__(self, transcript: Transcript) -> None:
        self.transcript = transcript
        self.current = transcript.initial
        initial = transcript.states[transcript.initial]
        super().__init__(transcript.theorem, transcript.statement, initial)
        self.visited: List[str] = [self.current]

    def _step(self, s: Sentence, timeout: Optional[float]) -> Union[ProofState, str]:
        key = s.normalized
        table = self.transcript.transitions.get(self.current, {})
        target = table.get(key)
        if target is None:
            if s.kind is Kind.PROOF:
                return self.transcript.states[self.current]
            if s.kind is Kind.QED:
                if self.current not in self.transcript.complete:
                    return f"(in proof {self.transcript.theorem}): {INCOMPLETE_PROOF}"
                return self.transcript.states[self.current]
            return f"No transition for {key!r} in state {self.current}."
        if isinstance(target, dict):
            return target["error"]
        self.current = target
        self.visited.append(target)
        return self.transcript.states[target]

    def _restore(self, state: ProofState) -> None:
        self.current = state.key
        self.visited.append(self.current)

    def is_complete(self) -> bool:
        return self.current in self.transcript.complete

    def _hammer(self, hints, timeout) -> Optional[List[Sentence]]:
        verdict = self.transcript.hammer.get(self.current, "fail")
        if not isinstance(verdict, dict) or "proof" not in verdict:
            return None
        proof = [sentence(raw) for raw in verdict["proof"]]
        depth = self.depth
        for s in proof:
            if not self.execute(s).ok:
                while self.depth > depth:
                    self.undo()
                return None
        return proof


class MockBackend:
    """Serves sessions from a set of transcripts keyed by theorem name."""

    def __init__(self, transcripts: Dict[str, Transcript]) -> None:
        self.transcripts = dict(transcripts)

    @classmethod
    def from_dir(cls, directory) -> "MockBackend":
        transcripts = {}
        for path in sorted(Path(directory).glob("*.json")):
            t = Transcript.load(path)
            transcripts[t.theorem] = t
        return cls(transcripts)

    def start_session(self, statement: str, env=None) -> MockSession:
        name, body = parse_header(statement)
        t = self.transcripts.get(name)
        if t is None:
            raise TheoremRejected(f"no transcript for theorem {name!r}")
        _, expected = parse_header(t.statement)
        if _squash(body) != _squash(expected):
            raise TheoremRejected(f"statement of {name} does not match the environment")
        return MockSession(t)


def _squash(text: str) -> str:
    return "".join(text.split())


def states_of(session: MockSession) -> Tuple[str, ...]:
    return tuple(session.visited)
