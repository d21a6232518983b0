from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import List, Optional, Sequence, Tuple

from ..prover.base import TheoremRejected, parse_header
from ..retrieval import RankedPremise
from ..script import Kind, ProofScript, ScriptSyntaxError, Sentence, parse_sentence, split_sentences


class NoProofFound(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    version: str
    instructions: str
    examples: Tuple[Tuple[str, str], ...]

    @classmethod
    def load(cls, path=None) -> "Template":
        if path is None:
            text = resources.files("proofmend.data").joinpath("prompt_template.json").read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        data = json.loads(text)
        return cls(
            version=data["version"],
            instructions=data["instructions"].strip(),
            examples=tuple((e["theorem"].strip(), e["proof"].strip()) for e in data["examples"]),
        )


@dataclass(frozen=True)
class Prompt:
    instructions: str
    examples: Tuple[Tuple[str, str], ...]
    premises: Tuple[Tuple[str, str], ...]
    target: str
    name: str = ""
    template_version: str = ""

    def user_text(self) -> str:
        parts = ["Here are examples of theorems and their proofs:"]
        for theorem, proof in self.examples:
            parts.append(f"{theorem}\n{proof}")
        parts.append("Premises:")
        if self.premises:
            parts.append("\n".join(f"{name} : {stmt}" for name, stmt in self.premises))
        else:
            parts.append("(none)")
        parts.append(f"Prove the following theorem:\n{self.target}")
        return "\n\n".join(parts) + "\n"

    def render(self) -> str:
        return f"{self.instructions}\n\n{self.user_text()}"

    def messages(self) -> List[dict]:
        return [
            {"role": "system", "content": self.instructions},
            {"role": "user", "content": self.user_text()},
        ]


def build_prompt(target: str, premises: Sequence[RankedPremise] = (),
                 template: Optional[Template] = None) -> Prompt:
    template = template or Template.load()
    seen = set()
    rows = []
    for p in premises:
        if p.name in seen:
            continue
        seen.add(p.name)
        rows.append((p.name, " ".join(p.doc.statement.split())))
    target = target.strip()
    if not target:
        raise ValueError("target theorem must be non-empty")
    try:
        name, _ = parse_header(target)
    except TheoremRejected:
        name = ""
    return Prompt(template.instructions, template.examples, tuple(rows), target, name, template.version)


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.S)
_VERNAC_RE = re.compile(r"^(Theorem|Lemma|Remark|Fact|Corollary|Proposition|Example|Goal|Require|Import|Export|Open|Set|Unset|From|Definition|Fixpoint)\b")
_TACTIC_HEAD_RE = re.compile(r"^[a-z_][\w']*!?$|^\d+:$")


def _trim(sentences: List[Sentence]) -> List[Sentence]:
    """Drop vernacular before the proof and anything after the closing command."""
    start = next((i for i, s in enumerate(sentences) if s.kind is Kind.PROOF), None)
    if start is None:
        start = 0
        while start < len(sentences) and _VERNAC_RE.match(sentences[start].raw):
            start += 1
    out = sentences[start:]
    end = next((i for i, s in enumerate(out) if s.kind is Kind.QED), None)
    return out[: end + 1] if end is not None else out


def _tactic_like(s: Sentence) -> bool:
    if s.kind is not Kind.TACTIC:
        return True
    parsed = parse_sentence(s)
    return bool(_TACTIC_HEAD_RE.match(parsed.head))


def _script(text: str, strict: bool) -> Optional[ProofScript]:
    try:
        sentences = _trim(split_sentences(text))
    except ScriptSyntaxError:
        return None
    if not sentences:
        return None
    if strict and not all(_tactic_like(s) for s in sentences):
        return None
    return ProofScript.of(sentences)


def extract_proof(raw: str) -> ProofScript:
    """Pull the proof script out of a model reply.

    Fenced code blocks win; then a ``Proof. ... Qed.`` region; then the
    whole reply, accepted only if every sentence looks like a tactic.
    """
    for block in _FENCE_RE.findall(raw):
        script = _script(block, strict=False)
        if script is not None:
            return script
    m = re.search(r"(?<![\w.])Proof\.(?:\s|$).*?(?<![\w.])(?:Qed|Defined)\.", raw, re.S)
    if m:
        script = _script(m.group(0), strict=False)
        if script is not None:
            return script
    script = _script(raw, strict=True)
    if script is not None:
        return script
    raise NoProofFound("no proof script found in model reply")
