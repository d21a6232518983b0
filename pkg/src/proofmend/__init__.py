"""Generate-then-repair proof automation for Coq."""

__version__ = "0.1.0"
