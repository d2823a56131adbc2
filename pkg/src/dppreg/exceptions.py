"""Exception and warning types shared across the package."""


class DPPError(Exception):
    """Base class for all errors raised by dppreg."""


class InvalidParams(DPPError, ValueError):
    pass


class NonConformingStep(DPPError, ValueError):
    """epsilon is not a positive integer multiple of the grid spacing."""


class EmptyDomain(DPPError, ValueError):
    pass


class OutOfHull(DPPError, IndexError):
    """A read landed outside the set covered by the lattice nodes."""


class NotAdmissible(DPPError, ValueError):
    pass


class UnsupportedVariant(DPPError, ValueError):
    pass


class NonFiniteValue(DPPError, FloatingPointError):
    pass


class RegionTooSmall(DPPError, ValueError):
    pass


class ConfigError(DPPError, ValueError):
    """Invalid experiment configuration; the message names the offending field."""


class MaxIterExceeded(RuntimeWarning):
    """Value iteration hit max_iter; the partial field is still returned."""
