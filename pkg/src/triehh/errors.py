"""Exception hierarchy.

Validation problems (bad parameters, bad input data) subclass ``ValueError``
so callers can treat them uniformly; the CLI maps them to exit code 1.
"""


class TrieHHError(Exception):
    """Base class for all package errors."""


class ValidationError(TrieHHError, ValueError):
    """Input or parameters rejected before any computation."""


class ParameterError(ValidationError):
    """A protocol or privacy parameter lies outside its valid range."""


class PopulationTooSmall(ParameterError):
    """The closed-form batch scale came out below 1."""


class AlphabetError(ValidationError):
    """A sequence holds a symbol outside the configured alphabet."""


class DatasetError(ValidationError):
    """A dataset is empty or violates its invariants."""


class UnsatisfiableError(TrieHHError):
    """A search ran past its cap without meeting the requested target."""
