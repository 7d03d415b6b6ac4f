"""
Errors
======

Exception hierarchy shared by the engines and the CLI. Every error carries a stable
``code`` and a ``details`` dict so the CLI can emit it as JSON.
"""

from typing import Any, Optional


class DissimError(Exception):
    """Base class for all dissim failures."""

    code = "dissim_error"
    exit_code = 3

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class InputError(DissimError, ValueError):
    """Malformed input file or invalid parameter."""

    code = "invalid_input"
    exit_code = 2


class ShapeMismatchError(DissimError, ValueError):
    """Operands with incompatible qubit counts or dimensions."""

    code = "shape_mismatch"


class CeilingExceededError(DissimError):
    """A dense, Kraus or statevector ceiling would be exceeded."""

    code = "ceiling_exceeded"


class NotCPTPError(DissimError):
    """A channel fails trace preservation beyond tolerance."""

    code = "not_cptp"


class InvalidStateError(DissimError, ValueError):
    """A state or density matrix fails its invariants."""

    code = "invalid_state"


class ConstructionError(DissimError):
    """A construction's dense self-check residual exceeded tolerance."""

    code = "construction_failed"


class PreconditionError(DissimError):
    """An operation was called outside its contract."""

    code = "precondition_failed"
