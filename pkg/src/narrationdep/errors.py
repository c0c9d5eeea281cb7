"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1, data
problems exit 2, numerical failures exit 3.
"""


class NarrationDepError(Exception):
    """Base class for all package-specific errors."""


class UsageError(NarrationDepError):
    """Bad command-line invocation or inconsistent flags."""


class ConfigurationError(NarrationDepError):
    """A configuration value is out of range or internally inconsistent."""


class DimensionError(NarrationDepError):
    """Operand shapes do not conform; the message names both shapes."""


class EmptySupportError(NarrationDepError):
    """A normalization was requested over an empty support (all-masked input)."""


class DataError(NarrationDepError):
    """Malformed or inconsistent input data (parse/schema problems)."""


class ConsistencyError(NarrationDepError):
    """Cross-structure invariant violated, e.g. a cluster assignment that
    does not cover every tweet of the user it belongs to."""


class InputError(NarrationDepError):
    """An operation received arguments that violate its preconditions."""


class NumericalError(NarrationDepError):
    """A numerical computation produced non-finite values."""
