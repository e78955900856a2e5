"""Scalar-field views used by the tracer and critical-point machinery.

A field is anything with exact value/gradient queries plus the span
geometry of its backing model(s). Three concrete kinds exist:

* :class:`SplineField` — the surface itself;
* :class:`JacobiField` — the gradient-alignment determinant
  ``h = f_x1 g_x2 - f_x2 g_x1`` of two models sharing one knot layout
  (its zero set is the Jacobi set of f and g);
* :class:`RidgeValleyField` — the same determinant with
  ``g = |grad f|^2`` substituted analytically, whose zero set is the
  ridge-valley graph of f.

Within every span each derived field is again a polynomial, of effective
per-dimension degree p_f + p_g - 1 and 3p_f - 1 respectively; the effective
degree drives the seeding density defaults.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import _kernels
from .errors import OrderError
from .model import MfaModel, SpanIndex


class ScalarField:
    """Common query surface over a model-backed scalar field."""

    ftype: int = _kernels.FIELD_PLAIN
    has_hessian = True

    def __init__(self, model: MfaModel, second: MfaModel | None = None):
        self.model = model
        self._second = second if second is not None else model

    @cached_property
    def _kargs(self):
        m = self.model
        return (self.ftype, m.degree, m.knots_u.knots, m.knots_v.knots,
                m.n_spans_u, m.n_spans_v, m.ctrl, self._second.ctrl,
                m.x1_min, 1.0 / (m.x1_max - m.x1_min),
                m.x2_min, 1.0 / (m.x2_max - m.x2_min))

    # -- geometry delegated to the backing model ---------------------------

    @property
    def effective_degree(self) -> int:
        return self.model.degree

    @property
    def domain(self):
        return self.model.domain

    @property
    def n_spans(self) -> tuple[int, int]:
        return self.model.n_spans_u, self.model.n_spans_v

    @property
    def span_length(self) -> float:
        """Uniform span length (the smaller one if dimensions differ)."""
        return min(self.model.span_lengths)

    def span_bounds(self, i: int, j: int):
        return self.model.span_bounds(i, j)

    def spans(self) -> list[SpanIndex]:
        return self.model.spans()

    # -- queries ------------------------------------------------------------

    def _eval_batch(self, pts: np.ndarray, order: int) -> np.ndarray:
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        out = np.zeros((pts.shape[0], 6))
        _kernels.field_eval_batch(*self._kargs, pts, order, out)
        return out

    def value(self, pts: np.ndarray) -> np.ndarray:
        return self._eval_batch(np.atleast_2d(pts), 0)[:, 0]

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        return self._eval_batch(np.atleast_2d(pts), 1)[:, 1:3]

    def value_gradient(self, pts: np.ndarray):
        out = self._eval_batch(np.atleast_2d(pts), 1)
        return out[:, 0], out[:, 1:3]

    def hessian(self, pts: np.ndarray) -> np.ndarray:
        """Hessian matrices, shape (n, 2, 2)."""
        if not self.has_hessian:
            raise OrderError(
                f"{type(self).__name__} does not support second derivatives")
        out = self._eval_batch(np.atleast_2d(pts), 2)
        hess = np.empty((out.shape[0], 2, 2))
        hess[:, 0, 0] = out[:, 3]
        hess[:, 0, 1] = out[:, 4]
        hess[:, 1, 0] = out[:, 4]
        hess[:, 1, 1] = out[:, 5]
        return hess

    def value_at(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float).reshape(1, 2))[0])


class SplineField(ScalarField):
    """The model surface itself."""

    ftype = _kernels.FIELD_PLAIN
    filtration_available = True

    def derivative_control_points(self, dim: int) -> np.ndarray:
        return self.model.derivative_control_points(dim)

    def value_range(self):
        return self.model.value_range()


class JacobiField(ScalarField):
    """Gradient-alignment determinant of two models on shared knots."""

    ftype = _kernels.FIELD_GRAD_CROSS
    filtration_available = False

    def __init__(self, f: MfaModel, g: MfaModel):
        if f.degree != g.degree:
            raise ValueError("both models must share one degree")
        if (not np.array_equal(f.knots_u.knots, g.knots_u.knots)
                or not np.array_equal(f.knots_v.knots, g.knots_v.knots)):
            raise ValueError("both models must share identical knot vectors")
        if f.domain != g.domain:
            raise ValueError("both models must share one physical domain")
        super().__init__(f, g)
        self.f = f
        self.g = g

    @property
    def effective_degree(self) -> int:
        return self.f.degree + self.g.degree - 1


class RidgeValleyField(ScalarField):
    """Determinant field whose zero set is the ridge-valley graph of f."""

    ftype = _kernels.FIELD_RIDGE
    filtration_available = False
    has_hessian = False

    def __init__(self, f: MfaModel):
        if f.degree < 3:
            raise OrderError(
                "ridge-valley extraction needs third derivatives; "
                f"model degree {f.degree} < 3")
        super().__init__(f)
        self.f = f

    @property
    def effective_degree(self) -> int:
        return 3 * self.f.degree - 1
