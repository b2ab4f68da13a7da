"""Shared exception types."""


class GeometryError(Exception):
    """Metric degenerate or otherwise unusable at a requested point."""


class CapabilityError(Exception):
    """Requested data (derivative order, spectrum, ...) is not available."""


class EvaluationError(Exception):
    """An evaluator produced a non-finite value; message names the node."""


class PreconditionError(ValueError):
    """Input violates a documented precondition of the operation."""


class ManifestError(ValueError):
    """Case manifest failed validation; message names the offending field."""
