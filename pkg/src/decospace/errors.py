"""Exception hierarchy shared by all modules.

Every error carries the originating module and, when applicable, the name of
the violated invariant so the CLI can report it and pick an exit code.
"""

from __future__ import annotations


class DecospaceError(Exception):
    module = "decospace"

    def __init__(self, message: str, *, module: str | None = None, invariant: str | None = None):
        super().__init__(message)
        if module is not None:
            self.module = module
        self.invariant = invariant

    def __str__(self) -> str:
        base = super().__str__()
        tag = f"[{self.module}]"
        if self.invariant:
            tag += f"[{self.invariant}]"
        return f"{tag} {base}"


class NumericGuardError(DecospaceError):
    """Base class for guards that stop a computation that would be untrustworthy."""


class AliasingError(NumericGuardError):
    """A frequency-domain quantity would be read outside the trusted band."""


class LatticeOverflowError(NumericGuardError):
    """A sampling lattice exceeds the configured size cap."""


class NoContractionError(NumericGuardError):
    """A Neumann iteration failed to contract."""


class MemoryBudgetError(NumericGuardError):
    """A tuple-of-fields computation would exceed the memory budget."""


class ConfigError(DecospaceError):
    module = "cli"


class InvariantFailure(DecospaceError):
    """An invariant check inside a verification suite failed."""
