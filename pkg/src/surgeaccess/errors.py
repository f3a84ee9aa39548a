"""Exception types shared across the package."""

from __future__ import annotations


class SurgeAccessError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SurgeAccessError, ValueError):
    """A value passed to an operation violates its preconditions."""


class UnsupportedBridgeError(SurgeAccessError, ValueError):
    """Bridge mass per unit length falls outside the fragility table domain."""


class UndefinedGroupError(SurgeAccessError, ValueError):
    """A population group has zero total weight, so its average is undefined."""


class InvalidSpecError(SurgeAccessError, ValueError):
    """A synthetic dataset spec cannot produce a valid bundle."""


class ValidationError(SurgeAccessError, ValueError):
    """One or more dataset validation failures.

    Carries every failure found in a single pass so callers can fix a
    broken bundle in one round trip instead of replaying errors one at
    a time.
    """

    def __init__(self, errors: list[str] | tuple[str, ...]):
        self.errors = list(errors)
        if not self.errors:
            raise InvalidInputError("ValidationError requires at least one message")
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s):\n{lines}")
