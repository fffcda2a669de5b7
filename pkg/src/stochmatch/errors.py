"""Exception types shared across the package."""

from __future__ import annotations


class ModelError(ValueError):
    """An operation received a model, edge or vertex set it cannot work with."""


class ScenarioError(ValueError):
    """A scenario file could not be parsed or describes an invalid model.

    ``line``/``column`` are set for syntax errors; ``violations`` for
    semantic ones.
    """

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None,
                 violations: list[str] | None = None) -> None:
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column
        self.violations = list(violations or [])


class CapExceededError(RuntimeError):
    """An exact computation would exceed its configured size cap."""


class PolicyError(RuntimeError):
    """A policy returned a decision that violates the adaptive framework."""
