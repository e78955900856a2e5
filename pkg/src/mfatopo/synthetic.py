"""Closed-form benchmark fields and samplers that feed the fitting stage.

Each named field carries its canonical domain and span counts, so tests and
the CLI can rebuild the same reference models from scratch. The Gaussian-sum
fields expose exact partial derivatives up to third order; the remaining
fields fall back to oracle-grade central finite differences (only ever used
by tests, never by the extraction pipeline).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GridData, MfaModel, fit

_SCHWEFEL_EDGE = (10.5 * np.pi) ** 2


@dataclass(frozen=True)
class GaussianTerm:
    """amplitude * exp(-a1*(x1-c1)^2 - a2*(x2-c2)^2)."""

    amplitude: float
    c1: float
    a1: float
    c2: float
    a2: float

    def _axis_derivs(self, u: np.ndarray, a: float, order: int) -> np.ndarray:
        e = np.exp(-a * u * u)
        out = np.empty((order + 1,) + u.shape)
        out[0] = e
        if order >= 1:
            out[1] = -2.0 * a * u * e
        if order >= 2:
            out[2] = (4.0 * a * a * u * u - 2.0 * a) * e
        if order >= 3:
            out[3] = (-8.0 * a ** 3 * u ** 3 + 12.0 * a * a * u) * e
        return out

    def partials(self, x1: np.ndarray, x2: np.ndarray, order: int):
        d1 = self._axis_derivs(x1 - self.c1, self.a1, order)
        d2 = self._axis_derivs(x2 - self.c2, self.a2, order)
        return {(i, j): self.amplitude * d1[i] * d2[j]
                for i in range(order + 1) for j in range(order + 1)
                if i + j <= order}


def _sinc1(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    zero = u == 0.0
    np.divide(np.sin(5.0 * u), u, out=out, where=~zero)
    out[zero] = 5.0  # removable singularity: limit of sin(5u)/u
    return out


def _sinc(x1, x2):
    return _sinc1(x1) + _sinc1(x2)


def _schwefel(x1, x2):
    return 0.5 * (418.9829 * 2.0
                  - x1 * np.sin(np.sqrt(np.abs(x1)))
                  - x2 * np.sin(np.sqrt(np.abs(x2))))


@dataclass(frozen=True)
class AnalyticField:
    """A named closed-form scalar field with its canonical fitting setup."""

    name: str
    domain: tuple[float, float, float, float]
    default_spans: tuple[int, int]
    terms: tuple[GaussianTerm, ...] | None = None
    fn: object = None

    @staticmethod
    def named(name: str) -> "AnalyticField":
        try:
            return FIELDS[name]
        except KeyError:
            raise KeyError(
                f"unknown field {name!r}; choose from {sorted(FIELDS)}"
            ) from None

    @property
    def has_analytic_derivatives(self) -> bool:
        return self.terms is not None

    def value(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.terms is not None:
            acc = np.zeros(np.broadcast(x1, x2).shape)
            for term in self.terms:
                acc += term.partials(x1, x2, 0)[(0, 0)]
            return acc
        return self.fn(x1, x2)

    def partial(self, x, d1: int, d2: int, fd_step: float | None = None):
        """Partial derivative at one point.

        Exact for Gaussian-sum fields; otherwise oracle-grade central
        finite differences of the next-lower order (test use only).
        """
        x1, x2 = float(x[0]), float(x[1])
        if self.terms is not None:
            acc = 0.0
            for term in self.terms:
                acc += float(term.partials(np.float64(x1), np.float64(x2),
                                           d1 + d2)[(d1, d2)])
            return acc
        if d1 + d2 == 0:
            return float(self.value(x1, x2))
        if fd_step is None:
            scale = max(self.domain[1] - self.domain[0],
                        self.domain[3] - self.domain[2])
            fd_step = 1e-5 * scale / 4.0
        if d1 > 0:
            lo = self.partial((x1 - fd_step, x2), d1 - 1, d2, fd_step)
            hi = self.partial((x1 + fd_step, x2), d1 - 1, d2, fd_step)
        else:
            lo = self.partial((x1, x2 - fd_step), d1, d2 - 1, fd_step)
            hi = self.partial((x1, x2 + fd_step), d1, d2 - 1, fd_step)
        return (hi - lo) / (2.0 * fd_step)


FIELDS = {
    "schwefel": AnalyticField(
        "schwefel",
        (-_SCHWEFEL_EDGE, _SCHWEFEL_EDGE, -_SCHWEFEL_EDGE, _SCHWEFEL_EDGE),
        (71, 71), fn=_schwefel),
    "sinc": AnalyticField(
        "sinc", (-2.0 * np.pi, 2.0 * np.pi, -2.0 * np.pi, 2.0 * np.pi),
        (27, 27), fn=_sinc),
    "gaussian_pair_f": AnalyticField(
        "gaussian_pair_f", (0.1, 0.9, 0.0, 0.6), (17, 11),
        terms=(GaussianTerm(0.25, 0.5, 1.0 / 0.02, 0.4, 1.0 / 0.02),)),
    "gaussian_pair_g": AnalyticField(
        "gaussian_pair_g", (0.1, 0.9, 0.0, 0.6), (17, 11),
        terms=(GaussianTerm(0.25, 0.3, 1.0 / 0.02, 0.2, 1.0 / 0.02),
               GaussianTerm(0.25, 0.75, 1.0 / 0.02, 0.25, 1.0 / 0.0288))),
    "gaussian_mixture": AnalyticField(
        "gaussian_mixture", (-1.0, 1.0, -0.8, 2.3), (46, 71),
        terms=(GaussianTerm(1.0, -0.4, 8.0, 0.0, 4.0),
               GaussianTerm(1.0, 0.5, 8.0, 0.0, 4.0),
               GaussianTerm(1.0, 0.0, 8.0, 0.77, 4.0),
               GaussianTerm(1.0, 0.0, 8.0, 1.5, 4.0),
               GaussianTerm(0.2, 0.0, 0.3, 0.5, 0.3))),
}


def eval_analytic(field: AnalyticField, x) -> float:
    """Exact formula evaluation at one point."""
    return float(field.value(float(x[0]), float(x[1])))


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    xs = np.linspace(lo, hi, n)
    if lo == -hi:
        # symmetrize so mirrored lattice points are exact negations
        xs = 0.5 * (xs - xs[::-1])
    return xs


def make_grid(field: AnalyticField, nx: int, ny: int) -> GridData:
    """Lattice samples of the field over its canonical domain."""
    x1_min, x1_max, x2_min, x2_max = field.domain
    xs = _axis(x1_min, x1_max, nx)
    ys = _axis(x2_min, x2_max, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return GridData(field.value(X, Y), x1_min, x1_max, x2_min, x2_max)


def fitted_model(field: AnalyticField, degree: int = 4,
                 spans: tuple[int, int] | None = None,
                 samples_per_span: int = 8) -> MfaModel:
    """Fit the canonical model for a named field."""
    if spans is None:
        spans = field.default_spans
    grid = make_grid(field, spans[0] * samples_per_span + 1,
                     spans[1] * samples_per_span + 1)
    return fit(grid, degree, spans[0] + degree, spans[1] + degree)
