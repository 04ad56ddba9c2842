"""Exception types shared across the package."""


class LayoutError(ValueError):
    """Subsystem labels or dimensions are inconsistent."""


class ValidationError(ValueError):
    """An object fails its defining numerical constraints (PSD, trace, ...)."""


class DimensionCapError(ValueError):
    """A requested computation exceeds the configured dimension cap."""


class SolverFailure(RuntimeError):
    """The SDP solver could not produce a usable answer."""
