"""Classify prover error messages into repairable categories.

Rules are read from a priority-ordered JSON table so that wording
differences between Coq releases can be added without code changes.
"""

from __future__ import annotations

import enum
import json
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .script import Bullet, Command, Sentence, Tactic, parse_sentence


class ErrorCategory(enum.Enum):
    WRONG_THEOREM_APPLICATION = "WrongTheoremApplication"
    INVALID_REFERENCE = "InvalidReference"
    INCORRECT_REWRITE = "IncorrectRewrite"
    REDUNDANT_INTRODUCTION = "RedundantIntroduction"
    TACTIC_MISUSE = "TacticMisuse"
    BULLET_MISUSE = "BulletMisuse"
    MISCELLANEOUS = "Miscellaneous"
    UNKNOWN = "Unknown"


# Display labels in report order.
LABELS = {
    ErrorCategory.WRONG_THEOREM_APPLICATION: "Wrong theorem application",
    ErrorCategory.INVALID_REFERENCE: "Invalid reference",
    ErrorCategory.INCORRECT_REWRITE: "Incorrect rewrite",
    ErrorCategory.REDUNDANT_INTRODUCTION: "Redundant introductions",
    ErrorCategory.TACTIC_MISUSE: "Tactic misuse",
    ErrorCategory.BULLET_MISUSE: "Bullet misuse",
    ErrorCategory.MISCELLANEOUS: "Miscellaneous errors",
    ErrorCategory.UNKNOWN: "Unknown",
}

_THEOREM_USING = {
    ErrorCategory.WRONG_THEOREM_APPLICATION,
    ErrorCategory.INCORRECT_REWRITE,
    ErrorCategory.TACTIC_MISUSE,
}
_IDENT_RE = re.compile(r"^@?([A-Za-z_][\w']*(?:\.[A-Za-z_][\w']*)*)$")
_ARG_SKIP = {"<-", "->", "with", "in", "at", "by", "as", "using", ";", "!", "?"}


@dataclass(frozen=True)
class ErrorFacts:
    category: ErrorCategory
    bad_reference: Optional[str] = None
    expected_bullet: Optional[str] = None
    unfinished_bullet: bool = False
    misused_theorem: Optional[str] = None
    rule: Optional[str] = None


@dataclass(frozen=True)
class Rule:
    name: str
    pattern: re.Pattern
    category: ErrorCategory
    heads: Optional[frozenset] = None
    unfinished_bullet: bool = False

    def matches(self, text: str, head: str) -> Optional[re.Match]:
        if self.heads is not None and head not in self.heads:
            return None
        return self.pattern.search(text)


class RuleTable:
    def __init__(self, rules: Sequence[Rule], version: str = "") -> None:
        self.rules = list(rules)
        self.version = version

    @classmethod
    def from_dict(cls, data: dict) -> "RuleTable":
        rules = []
        for r in data["rules"]:
            heads = r.get("heads")
            if isinstance(heads, str) and heads.startswith("@"):
                heads = data[heads[1:]]
            rules.append(
                Rule(
                    name=r["name"],
                    pattern=re.compile(r["pattern"], re.S),
                    category=ErrorCategory(r["category"]),
                    heads=frozenset(heads) if heads is not None else None,
                    unfinished_bullet=bool(r.get("unfinished_bullet", False)),
                )
            )
        return cls(rules, data.get("version", ""))

    @classmethod
    def load(cls, path=None) -> "RuleTable":
        if path is None:
            text = resources.files("proofmend.data").joinpath("error_rules.json").read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        return cls.from_dict(json.loads(text))


_default_table: Optional[RuleTable] = None


def default_rules() -> RuleTable:
    global _default_table
    if _default_table is None:
        _default_table = RuleTable.load()
    return _default_table


def _head(failing) -> str:
    if failing is None:
        return ""
    if isinstance(failing, Sentence):
        failing = parse_sentence(failing)
    if isinstance(failing, Tactic):
        return failing.head
    if isinstance(failing, Bullet):
        return failing.symbol
    if isinstance(failing, Command):
        return failing.raw.rstrip(".").split()[0]
    return str(failing)


def first_identifier(tactic: Tactic) -> Optional[str]:
    """The first argument that names a theorem or hypothesis."""
    for arg in tactic.args:
        if arg in _ARG_SKIP or arg.endswith(":"):
            continue
        m = _IDENT_RE.match(arg.strip("()"))
        if m:
            return m.group(1)
        return None
    return None


def classify(error_text: str, failing: Union[Tactic, Sentence, Bullet, Command, None] = None,
             rules: Optional[RuleTable] = None) -> ErrorFacts:
    if not error_text or not error_text.strip():
        raise ValueError("error_text must be non-empty")
    table = rules or default_rules()
    text = " ".join(error_text.split())
    head = _head(failing)
    for rule in table.rules:
        m = rule.matches(text, head)
        if not m:
            continue
        groups = m.groupdict()
        misused = None
        if rule.category in _THEOREM_USING:
            tactic = failing if isinstance(failing, Tactic) else None
            if isinstance(failing, Sentence):
                parsed = parse_sentence(failing)
                tactic = parsed if isinstance(parsed, Tactic) else None
            if tactic is not None:
                misused = first_identifier(tactic)
        return ErrorFacts(
            category=rule.category,
            bad_reference=groups.get("bad_reference"),
            expected_bullet=groups.get("expected_bullet"),
            unfinished_bullet=rule.unfinished_bullet,
            misused_theorem=misused,
            rule=rule.name,
        )
    return ErrorFacts(ErrorCategory.UNKNOWN)


def category_histogram(events: Iterable[Union[ErrorFacts, ErrorCategory]]) -> Dict[ErrorCategory, int]:
    counts = Counter(e.category if isinstance(e, ErrorFacts) else e for e in events)
    return {c: counts.get(c, 0) for c in ErrorCategory}


def render_histogram(hist: Dict[ErrorCategory, int], include_unknown: bool = True) -> str:
    """Table of counts and percentages; percentages are of the shown total."""
    rows: List[ErrorCategory] = [c for c in ErrorCategory if include_unknown or c is not ErrorCategory.UNKNOWN]
    total = sum(hist.get(c, 0) for c in rows)
    width = max(len(LABELS[c]) for c in rows)
    lines = [f"{'Type':<{width}}  {'Count':>6}  {'Percent':>7}"]
    for c in rows:
        n = hist.get(c, 0)
        pct = 100.0 * n / total if total else 0.0
        lines.append(f"{LABELS[c]:<{width}}  {n:>6}  {pct:>6.1f}%")
    lines.append(f"{'Total':<{width}}  {total:>6}  {100.0 if total else 0.0:>6.1f}%")
    return "\n".join(lines)
