"""Exception types shared across the toolkit."""


class VmapError(Exception):
    """Base class for all toolkit errors."""


class IngestError(VmapError):
    """A runs file could not be parsed or violated a configuration invariant."""


class FitError(VmapError):
    """A surrogate model could not be fitted."""


class OptimizationError(VmapError):
    """The configuration optimizer failed."""
