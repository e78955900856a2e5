"""Topology extraction directly from tensor-product B-spline models."""

from .errors import (DegeneracyError, DomainError, FitError, MfaTopoError,
                     OrderError, ParseError)
from .model import (GridData, KnotVector, MfaModel, SpanIndex, basis_values,
                    fit, load_grid, load_model, save_grid, save_model)

__all__ = [
    "DegeneracyError", "DomainError", "FitError", "MfaTopoError",
    "OrderError", "ParseError",
    "GridData", "KnotVector", "MfaModel", "SpanIndex", "basis_values",
    "fit", "load_grid", "load_model", "save_grid", "save_model",
]
