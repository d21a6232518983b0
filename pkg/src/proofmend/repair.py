"""Targeted repairs for a single failing sentence.

Every mechanism either leaves the replacement executed in the session
(``Repaired``), removes the sentence (``Dropped``), or restores the
session to exactly where it started (``NotRepaired``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import AbstractSet, List, Optional, Sequence, Tuple

from .errors import ErrorCategory, ErrorFacts
from .prover.base import ProofState, Session
from .retrieval import rank_names
from .script import Kind, Sentence, Tactic, parse_sentence, sentence

DEFAULT_MAX_REPLACEMENTS = 10


class RepairStatus(enum.Enum):
    REPAIRED = "Repaired"
    DROPPED = "Dropped"
    NOT_REPAIRED = "NotRepaired"


class Mechanism(enum.Enum):
    REFERENCE_REPLACEMENT = "ReferenceReplacement"
    RENAMING = "Renaming"
    BULLET_TRANSFORMATION = "BulletTransformation"
    PREMISE_AUGMENTATION = "PremiseAugmentation"


DISPATCH = {
    ErrorCategory.INVALID_REFERENCE: Mechanism.REFERENCE_REPLACEMENT,
    ErrorCategory.REDUNDANT_INTRODUCTION: Mechanism.RENAMING,
    ErrorCategory.BULLET_MISUSE: Mechanism.BULLET_TRANSFORMATION,
    ErrorCategory.WRONG_THEOREM_APPLICATION: Mechanism.PREMISE_AUGMENTATION,
    ErrorCategory.INCORRECT_REWRITE: Mechanism.PREMISE_AUGMENTATION,
    ErrorCategory.TACTIC_MISUSE: Mechanism.PREMISE_AUGMENTATION,
}


@dataclass(frozen=True)
class RepairOutcome:
    status: RepairStatus
    mechanism: Optional[Mechanism] = None
    replacement: Tuple[Sentence, ...] = ()
    attempts: int = 0

    @property
    def repaired(self) -> bool:
        return self.status is RepairStatus.REPAIRED


@dataclass
class RepairContext:
    premise_names: Sequence[str] = ()
    hypothesis_names: Sequence[str] = ()
    max_replacements: int = DEFAULT_MAX_REPLACEMENTS
    timeout: float = 10.0
    disabled: AbstractSet[Mechanism] = field(default_factory=frozenset)


def _not_repaired(mechanism: Optional[Mechanism], attempts: int = 0) -> RepairOutcome:
    return RepairOutcome(RepairStatus.NOT_REPAIRED, mechanism, (), attempts)


def _as_tactic(failing) -> Optional[Tactic]:
    if isinstance(failing, Sentence):
        failing = parse_sentence(failing)
    return failing if isinstance(failing, Tactic) else None


def _run_all(session: Session, sentences: Sequence[Sentence], timeout: Optional[float] = None) -> bool:
    """Execute ``sentences`` in order; on any failure roll all of them back."""
    depth = session.depth
    for s in sentences:
        if not session.execute(s, timeout=timeout).ok:
            while session.depth > depth:
                session.undo()
            return False
    return True


def repair(facts: ErrorFacts, failing: Sentence, state: ProofState, session: Session,
           context: Optional[RepairContext] = None) -> RepairOutcome:
    context = context or RepairContext()
    mechanism = DISPATCH.get(facts.category)
    if mechanism is None or mechanism in context.disabled:
        return _not_repaired(mechanism)
    if mechanism is Mechanism.REFERENCE_REPLACEMENT:
        tactic = _as_tactic(failing)
        if tactic is None or not facts.bad_reference:
            return _not_repaired(mechanism)
        candidates = list(context.premise_names) + list(context.hypothesis_names)
        return replace_reference(tactic, facts.bad_reference, candidates, session, context.max_replacements)
    if mechanism is Mechanism.RENAMING:
        tactic = _as_tactic(failing)
        if tactic is None:
            return _not_repaired(mechanism)
        return rename_intro(tactic, state, session)
    if mechanism is Mechanism.BULLET_TRANSFORMATION:
        return transform_bullet(facts, failing, session)
    if not facts.misused_theorem:
        return _not_repaired(mechanism)
    return augment_premise(facts.misused_theorem, session, context.timeout)


def _substitute(raw: str, old: str, new: str) -> str:
    pattern = r"(?<![\w.'])" + re.escape(old) + r"(?![\w'])"
    return re.sub(pattern, lambda _: new, raw)


def replace_reference(failing: Tactic, bad: str, candidates: Sequence[str], session: Session,
                      max_attempts: int = DEFAULT_MAX_REPLACEMENTS) -> RepairOutcome:
    mechanism = Mechanism.REFERENCE_REPLACEMENT
    ranked = [c for c in rank_names(candidates, bad) if c != bad]
    attempts = 0
    for candidate in ranked[:max_attempts]:
        raw = _substitute(failing.raw, bad, candidate)
        if raw == failing.raw:
            continue
        fixed = sentence(raw)
        attempts += 1
        if session.execute(fixed).ok:
            return RepairOutcome(RepairStatus.REPAIRED, mechanism, (fixed,), attempts)
    return _not_repaired(mechanism, attempts)


_NAME_RE = re.compile(r"^[A-Za-z_][\w']*$")


def rename_intro(failing: Tactic, state: ProofState, session: Session) -> RepairOutcome:
    mechanism = Mechanism.RENAMING
    if failing.head not in ("intros", "intro"):
        return _not_repaired(mechanism)
    goal = state.focused
    taken = set(goal.names) if goal else set()
    new_args: List[str] = []
    changed = False
    for arg in failing.args:
        if _NAME_RE.match(arg):
            name = arg
            while name in taken:
                name += "'"
            if name != arg:
                changed = True
            taken.add(name)
            new_args.append(name)
        else:
            new_args.append(arg)
    if not changed:
        # No clashing name, so the failure is that nothing can be introduced.
        return RepairOutcome(RepairStatus.DROPPED, mechanism, (), 0)
    fixed = sentence(" ".join([failing.head, *new_args]) + ".")
    if session.execute(fixed).ok:
        return RepairOutcome(RepairStatus.REPAIRED, mechanism, (fixed,), 1)
    return _not_repaired(mechanism, 1)


def transform_bullet(facts: ErrorFacts, failing: Sentence, session: Session) -> RepairOutcome:
    mechanism = Mechanism.BULLET_TRANSFORMATION
    if facts.unfinished_bullet or not facts.expected_bullet:
        # Unsolved goals remain: backtracking deals with those.
        return _not_repaired(mechanism)
    bullet = sentence(facts.expected_bullet)
    if failing.kind is Kind.BULLET:
        replacement = (bullet,)
    else:
        # A tactic issued where a bullet was required: insert the bullet.
        replacement = (bullet, failing)
    if _run_all(session, replacement):
        return RepairOutcome(RepairStatus.REPAIRED, mechanism, replacement, 1)
    return _not_repaired(mechanism, 1)


def augment_premise(misused: str, session: Session, timeout: float = 10.0) -> RepairOutcome:
    mechanism = Mechanism.PREMISE_AUGMENTATION
    before = session.state
    fixed = sentence(f"qsimpl use: {misused}.")
    result = session.execute(fixed, timeout=timeout)
    if not result.ok:
        return _not_repaired(mechanism, 1)
    if result.state.goals == before.goals and result.state.unfocused == before.unfocused:
        session.undo()
        return _not_repaired(mechanism, 1)
    return RepairOutcome(RepairStatus.REPAIRED, mechanism, (fixed,), 1)
