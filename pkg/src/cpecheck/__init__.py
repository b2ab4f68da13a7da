"""cpecheck: numerical verification of CPE curvature identities.

Builds explicit closed Riemannian manifolds and candidate CPE potentials,
computes curvature and covariant derivatives from exact chart data, and
certifies the pointwise equations, integral identities, inequalities and
extremal bounds of the CPE analysis at machine precision.
"""

from .errors import (
    CapabilityError,
    EvaluationError,
    GeometryError,
    ManifestError,
    PreconditionError,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "EvaluationError",
    "GeometryError",
    "ManifestError",
    "PreconditionError",
]
