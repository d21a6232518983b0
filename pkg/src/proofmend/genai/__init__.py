"""Prompt construction, reply parsing and model clients."""

from .clients import (
    ChatCompletionClient,
    FixtureMissing,
    MockModelClient,
    ModelClient,
    ModelError,
    ModelReply,
    ModelTimeout,
    RemoteError,
)
from .prompt import NoProofFound, Prompt, Template, build_prompt, extract_proof

__all__ = [
    "ChatCompletionClient",
    "FixtureMissing",
    "MockModelClient",
    "ModelClient",
    "ModelError",
    "ModelReply",
    "ModelTimeout",
    "NoProofFound",
    "Prompt",
    "RemoteError",
    "Template",
    "build_prompt",
    "extract_proof",
]
