"""Splitting Coq proof scripts into sentences and classifying them.

A sentence is the unit Coq executes: a tactic or command terminated by a
dot, a bullet (``-``, ``+``, ``*``, possibly repeated) or a goal brace.
Comments are dropped; string literals are respected.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

BULLET_CHARS = "-+*"


class ScriptSyntaxError(ValueError):
    """Raised when the script cannot be segmented."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnterminatedComment(ScriptSyntaxError):
    pass


class UnterminatedString(ScriptSyntaxError):
    pass


class Kind(enum.Enum):
    BULLET = "Bullet"
    TACTIC = "Tactic"
    PROOF = "ProofCmd"
    QED = "QedCmd"
    ABORT = "AbortCmd"
    BRACE_OPEN = "BraceOpen"
    BRACE_CLOSE = "BraceClose"


@dataclass(frozen=True)
class Sentence:
    raw: str
    kind: Kind = Kind.TACTIC
    # Positional metadata only; two sentences with the same text are equal.
    span: Tuple[int, int] = field(default=(0, 0), compare=False)

    def __str__(self) -> str:
        return self.raw

    @property
    def normalized(self) -> str:
        return normalize(self.raw)

    @property
    def is_bullet(self) -> bool:
        return self.kind is Kind.BULLET


@dataclass(frozen=True)
class Tactic:
    head: str
    args: Tuple[str, ...]
    raw: str


@dataclass(frozen=True)
class Bullet:
    symbol: str

    @property
    def depth(self) -> int:
        """Repeat count of the bullet character ("--" has depth 2)."""
        return len(self.symbol)


@dataclass(frozen=True)
class Command:
    kind: Kind
    raw: str


Parsed = Union[Tactic, Bullet, Command]


@dataclass(frozen=True)
class ProofScript:
    sentences: Tuple[Sentence, ...]
    source: str = ""

    @classmethod
    def from_text(cls, source: str) -> "ProofScript":
        return cls(tuple(split_sentences(source)), source)

    @classmethod
    def of(cls, sentences) -> "ProofScript":
        sentences = tuple(sentences)
        return cls(sentences, render_sentences(sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def render(self) -> str:
        return render_sentences(self.sentences)


def normalize(text: str) -> str:
    """Trim and collapse internal whitespace runs to one space."""
    return " ".join(text.split())


_PROOF_RE = re.compile(r"^Proof\b")
_QED_RE = re.compile(r"^(Qed|Defined|Save)\b")
_ABORT_RE = re.compile(r"^(Abort|Admitted)\b")


def _kind_of(raw: str) -> Kind:
    if raw and all(c == raw[0] for c in raw) and raw[0] in BULLET_CHARS:
        return Kind.BULLET
    if raw == "{":
        return Kind.BRACE_OPEN
    if raw == "}":
        return Kind.BRACE_CLOSE
    if _PROOF_RE.match(raw):
        return Kind.PROOF
    if _QED_RE.match(raw):
        return Kind.QED
    if _ABORT_RE.match(raw):
        return Kind.ABORT
    return Kind.TACTIC


def sentence(raw: str) -> Sentence:
    """Build a single sentence from already-segmented text."""
    raw = raw.strip()
    if not raw:
        raise ValueError("empty sentence")
    return Sentence(raw, _kind_of(raw), (0, len(raw)))


def _skip_string(source: str, i: int) -> int:
    """Return the index just past the string literal opening at ``i``."""
    n = len(source)
    j = i + 1
    while j < n:
        if source[j] == '"':
            if j + 1 < n and source[j + 1] == '"':
                j += 2
                continue
            return j + 1
        j += 1
    raise UnterminatedString("unterminated string literal", i)


def _skip_comment(source: str, i: int) -> int:
    """Return the index just past the (possibly nested) comment at ``i``."""
    n = len(source)
    depth = 0
    j = i
    while j < n:
        if source.startswith("(*", j):
            depth += 1
            j += 2
        elif source.startswith("*)", j):
            depth -= 1
            j += 2
            if depth == 0:
                return j
        elif source[j] == '"':
            j = _skip_string(source, j)
        else:
            j += 1
    raise UnterminatedComment("unterminated comment", i)


def split_sentences(source: str) -> List[Sentence]:
    out: List[Sentence] = []
    n = len(source)
    i = 0
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if source.startswith("(*", i):
            i = _skip_comment(source, i)
            continue
        if c in BULLET_CHARS:
            j = i
            while j < n and source[j] == c:
                j += 1
            out.append(Sentence(source[i:j], Kind.BULLET, (i, j)))
            i = j
            continue
        if c in "{}":
            out.append(Sentence(c, Kind.BRACE_OPEN if c == "{" else Kind.BRACE_CLOSE, (i, i + 1)))
            i += 1
            continue

        start = i
        parts: List[str] = []
        seg = i
        end: Optional[int] = None
        while i < n:
            if source.startswith("(*", i):
                parts.append(source[seg:i])
                i = _skip_comment(source, i)
                parts.append(" ")
                seg = i
                continue
            ch = source[i]
            if ch == '"':
                i = _skip_string(source, i)
                continue
            if ch == "." and (i + 1 == n or source[i + 1].isspace()):
                i += 1
                end = i
                break
            i += 1
        parts.append(source[seg:i])
        raw = "".join(parts).strip()
        if end is None:
            if not raw:
                break
            # Model output frequently omits the final dot.
            raw += "."
        out.append(Sentence(raw, _kind_of(raw), (start, i)))
    return out


def _split_args(text: str) -> List[str]:
    """Split on whitespace and commas outside of brackets; ';' is its own token."""
    args: List[str] = []
    buf: List[str] = []
    depth = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == '"':
            j = _skip_string(text, i)
            buf.append(text[i:j])
            i = j
            continue
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        if depth == 0 and (ch.isspace() or ch in ",;"):
            if buf:
                args.append("".join(buf))
                buf = []
            if ch == ";":
                args.append(";")
        else:
            buf.append(ch)
        i += 1
    if buf:
        args.append("".join(buf))
    return args


def parse_sentence(s: Sentence) -> Parsed:
    if s.kind is Kind.BULLET:
        return Bullet(s.raw)
    if s.kind is not Kind.TACTIC:
        return Command(s.kind, s.raw)
    body = s.raw[:-1] if s.raw.endswith(".") else s.raw
    tokens = _split_args(body)
    if not tokens:
        return Tactic("", (), s.raw)
    return Tactic(tokens[0], tuple(tokens[1:]), s.raw)


def render_sentences(sentences) -> str:
    return " ".join(s.raw for s in sentences)


def render(script: ProofScript) -> str:
    return render_sentences(script.sentences)
