"""Drive a ``coqtop -emacs`` child process.

Each sentence is written on one line; the toplevel answers with its
output followed by a prompt of the form
``<prompt>name < 12 |name| 0 < </prompt>`` whose number is the state id
used by ``BackTo`` for undo.
"""

from __future__ import annotations

import math
import os
import re
import select
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from ..script import Sentence
from .base import (
    BackendUnavailable,
    Goal,
    Hypothesis,
    ProofState,
    ProverError,
    Session,
    TheoremRejected,
    parse_header,
)

ENV_EXECUTABLE = "PROOFMEND_COQTOP"
ENV_FLAGS = "PROOFMEND_COQTOP_FLAGS"

PROMPT_RE = re.compile(r"<prompt>(\S+) < (\d+) \|([^|]*)\| (\d+) < </prompt>")
ERROR_RE = re.compile(r"^Error:\s*(.*)", re.M | re.S)
GOALS_HEADER_RE = re.compile(r"^(\d+) (?:sub)?goals?\b", re.M)
OTHER_GOAL_RE = re.compile(r"^\s*(?:sub)?goal (\d+)(?: \(ID \d+\))? is:\s*$", re.M)
TAG_RE = re.compile(r"</?(?:infomsg|warning|prompt)[^>]*>")


@dataclass
class CoqtopConfig:
    executable: str = "coqtop"
    flags: List[str] = field(default_factory=list)
    timeout: float = 60.0
    preamble: List[str] = field(default_factory=list)

    @classmethod
    def from_env(cls) -> "CoqtopConfig":
        exe = os.environ.get(ENV_EXECUTABLE)
        if not exe:
            raise BackendUnavailable(f"set {ENV_EXECUTABLE} to a coqtop executable")
        return cls(executable=exe, flags=shlex.split(os.environ.get(ENV_FLAGS, "")))


class CoqtopProcess:
    def __init__(self, config: CoqtopConfig) -> None:
        exe = shutil.which(config.executable) or config.executable
        if not os.path.exists(exe):
            raise BackendUnavailable(f"coqtop executable not found: {config.executable}")
        self.config = config
        try:
            self.proc = subprocess.Popen(
                [exe, "-emacs", *config.flags],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
            )
        except OSError as e:
            raise BackendUnavailable(str(e)) from e
        self._buf = b""
        _, self.state_id = self._read_until_prompt(config.timeout)

    def send(self, command: str, timeout: Optional[float] = None) -> Tuple[str, int]:
        line = " ".join(command.split())
        try:
            self.proc.stdin.write(line.encode("utf-8") + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise BackendUnavailable(f"coqtop died: {e}") from e
        limit = self.config.timeout if timeout is None else timeout + self.config.timeout
        output, self.state_id = self._read_until_prompt(limit)
        return output, self.state_id

    def _read_until_prompt(self, timeout: float) -> Tuple[str, int]:
        deadline = time.monotonic() + timeout
        fd = self.proc.stdout.fileno()
        while True:
            text = self._buf.decode("utf-8", errors="replace")
            m = PROMPT_RE.search(text)
            if m:
                consumed = len(text[: m.end()].encode("utf-8"))
                self._buf = self._buf[consumed:]
                return text[: m.start()], int(m.group(2))
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.kill()
                raise BackendUnavailable("coqtop did not answer in time")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                raise BackendUnavailable("coqtop exited unexpectedly")
            self._buf += chunk

    def kill(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.wait()

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=5)
            except Exception:
                self.kill()


def extract_error(output: str) -> Optional[str]:
    m = ERROR_RE.search(TAG_RE.sub("", output))
    if not m:
        return None
    return " ".join(m.group(1).split())


def parse_goals(output: str, key: Optional[str] = None) -> ProofState:
    text = TAG_RE.sub("", output)
    if "No more subgoals" in text or "No more goals" in text:
        return ProofState((), key=key)
    if "unfocused goals" in text or "This subproof is complete" in text:
        return ProofState((), unfocused=1, key=key)
    header = GOALS_HEADER_RE.search(text)
    if not header:
        return ProofState((), key=key)
    body = text[header.end():]
    others = list(OTHER_GOAL_RE.finditer(body))
    first = body[: others[0].start()] if others else body
    goals = [_parse_first_goal(first, f"{key}.1")]
    for i, m in enumerate(others):
        end = others[i + 1].start() if i + 1 < len(others) else len(body)
        concl = " ".join(body[m.end():end].split())
        goals.append(Goal((), concl, f"{key}.{m.group(1)}"))
    return ProofState(tuple(goals), key=key)


def _parse_first_goal(text: str, gid: str) -> Goal:
    lines = text.splitlines()
    sep = next((i for i, ln in enumerate(lines) if ln.strip().startswith("====")), None)
    if sep is None:
        return Goal((), " ".join(text.split()), gid)
    hyps: List[str] = []
    for ln in lines[:sep]:
        if not ln.strip() or ln.strip().startswith("("):
            continue
        # Hypotheses wrapped by the printer continue on deeper-indented lines.
        if hyps and ":" not in ln.split("(")[0] and len(ln) - len(ln.lstrip()) > 2:
            hyps[-1] += " " + ln.strip()
        else:
            hyps.append(ln.strip())
    parsed = tuple(Hypothesis.parse(h) for h in hyps if ":" in h)
    concl = " ".join(" ".join(lines[sep + 1:]).split())
    return Goal(parsed, concl, gid)


class CoqtopSession(Session):
    def __init__(self, process: CoqtopProcess, name: str, statement: str, initial: ProofState,
                 hammer_candidates: Optional[Sequence[str]] = None) -> None:
        super().__init__(name, statement, initial)
        self.process = process
        if hammer_candidates is not None:
            self.hammer_candidates = tuple(hammer_candidates)

    def _step(self, s: Sentence, timeout: Optional[float]) -> Union[ProofState, str]:
        command = s.raw
        if timeout is not None:
            command = f"Timeout {max(1, math.ceil(timeout))} {command}"
        output, state_id = self.process.send(command, timeout)
        error = extract_error(output)
        if error is not None:
            return error
        return parse_goals(output, key=str(state_id))

    def _restore(self, state: ProofState) -> None:
        output, _ = self.process.send(f"BackTo {state.key}.")
        error = extract_error(output)
        if error is not None:
            raise ProverError(f"BackTo {state.key} failed: {error}")

    def close(self) -> None:
        self.process.close()


class CoqtopBackend:
    def __init__(self, config: Optional[CoqtopConfig] = None,
                 hammer_candidates: Optional[Sequence[str]] = None) -> None:
        self.config = config or CoqtopConfig.from_env()
        self.hammer_candidates = hammer_candidates

    def start_session(self, statement: str, env=None) -> CoqtopSession:
        name, _ = parse_header(statement)
        process = CoqtopProcess(self.config)
        preamble = list(self.config.preamble) + list(getattr(env, "preamble", None) or [])
        for command in preamble:
            output, _ = process.send(command)
            error = extract_error(output)
            if error is not None:
                process.close()
                raise BackendUnavailable(f"preamble command {command!r} failed: {error}")
        output, state_id = process.send(statement)
        error = extract_error(output)
        if error is not None:
            process.close()
            raise TheoremRejected(error)
        initial = parse_goals(output, key=str(state_id))
        return CoqtopSession(process, name, statement, initial, self.hammer_candidates)
