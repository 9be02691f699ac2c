"""Exception hierarchy shared across shadowlab modules."""

from __future__ import annotations

import os

DEFAULT_CAP = 2_000_000


def resource_cap(default: int = DEFAULT_CAP) -> int:
    """Element/grid cap, overridable through ``SHADOWLAB_CAP``."""
    raw = os.environ.get("SHADOWLAB_CAP")
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"SHADOWLAB_CAP must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise ValueError("SHADOWLAB_CAP must be positive")
    return value


class ShadowlabError(Exception):
    pass


class PresentationError(ShadowlabError, ValueError):
    """Malformed presentation or word; ``position`` is the offending index."""

    def __init__(self, message: str, text: str = "", position: int | None = None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at position {position} in {text!r}"
        super().__init__(message)


class UnsupportedGroupError(ShadowlabError, ValueError):
    pass


class FamilyMismatchError(ShadowlabError, ValueError):
    pass


class CapExceededError(ShadowlabError, RuntimeError):
    pass


class RelationError(ShadowlabError, ValueError):
    """A matrix assignment violates a defining relation."""

    def __init__(self, relation: str, residual):
        self.relation = relation
        self.residual = residual
        super().__init__(f"relation {relation} violated; residual {residual}")


class UnsupportedMatrixError(ShadowlabError, ValueError):
    pass


class ParameterError(ShadowlabError, ValueError):
    pass
