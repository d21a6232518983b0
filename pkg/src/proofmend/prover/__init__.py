"""Prover backends: a transcript-driven mock and a coqtop subprocess adapter."""

from .base import (
    Backend,
    BackendUnavailable,
    Goal,
    Hypothesis,
    NothingToUndo,
    ProofState,
    ProverError,
    Session,
    StepResult,
    TheoremRejected,
    parse_header,
)
from .mock import MockBackend, MockSession, Transcript, TranscriptError

__all__ = [
    "Backend",
    "BackendUnavailable",
    "Goal",
    "Hypothesis",
    "MockBackend",
    "MockSession",
    "NothingToUndo",
    "ProofState",
    "ProverError",
    "Session",
    "StepResult",
    "TheoremRejected",
    "Transcript",
    "TranscriptError",
    "parse_header",
]
