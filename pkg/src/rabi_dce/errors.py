"""Exception hierarchy for rabi_dce.

Numerical failures carry the simulation time at which they happened and a
small diagnostics mapping, so the CLI can report them and pick an exit code.
"""

from typing import Any


class RabiDceError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(RabiDceError):
    """Invalid, incomplete or unparsable run configuration."""

    exit_code = 2


class DimensionError(RabiDceError, ValueError):
    """Operator or state dimensions do not match the Hilbert space layout."""

    exit_code = 3


class NumericalError(RabiDceError):
    """A numerical routine failed or a run left its numerical-hygiene bounds."""

    exit_code = 3

    def __init__(self, message: str, *, t: float | None = None, diagnostics: dict[str, Any] | None = None):
        self.t = t
        self.diagnostics = dict(diagnostics or {})
        if t is not None:
            message = f"{message} (at t={t:.6g})"
        super().__init__(message)


class EigensolverError(NumericalError):
    pass


class StepUnderflowError(NumericalError):
    pass


class TraceDriftError(NumericalError):
    pass


class PositivityError(NumericalError):
    pass


class TruncationError(NumericalError):
    """Population leaked into the highest retained Fock levels."""

    exit_code = 4
