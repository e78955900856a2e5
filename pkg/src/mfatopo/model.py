"""Tensor-product B-spline surface models.

An :class:`MfaModel` stores a clamped uniform knot vector per dimension and
an ``n1 x n2`` grid of scalar control points, and answers exact value and
derivative queries anywhere in its physical domain. Models are immutable
after construction; every query is read-only and thread-safe.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DomainError, FitError, OrderError, ParseError

_KNOT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Clamped knot vector with uniformly spaced interior knots."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        p = self.degree
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        knots = np.ascontiguousarray(np.asarray(self.knots, dtype=np.float64))
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError("knot vector too short for degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if np.any(knots[: p + 1] != 0.0) or np.any(knots[-(p + 1):] != 1.0):
            raise ValueError("knot vector must be clamped to [0, 1]")
        spans = np.diff(knots[p:len(knots) - p])
        if spans.size == 0 or np.any(np.abs(spans - spans[0]) > _KNOT_TOL):
            raise ValueError("interior knots must be uniformly spaced")

    @classmethod
    def clamped_uniform(cls, degree: int, n_ctrl: int) -> "KnotVector":
        """Knot vector for ``n_ctrl`` control points of the given degree."""
        n_spans = n_ctrl - degree
        if n_spans < 1:
            raise ValueError("need at least degree+1 control points")
        interior = np.arange(1, n_spans) / n_spans
        knots = np.concatenate([
            np.zeros(degree + 1), interior, np.ones(degree + 1),
        ])
        return cls(degree, knots)

    @property
    def n_ctrl(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def n_spans(self) -> int:
        return self.n_ctrl - self.degree

    def span_index(self, u: float) -> int:
        if not 0.0 <= u <= 1.0:
            raise DomainError(f"parameter {u} outside [0, 1]")
        return int(_kernels.span_index(self.n_spans, float(u)))


def basis_values(kv: KnotVector, u: float, order: int = 0):
    """Active basis functions at ``u`` with derivatives up to ``order``.

    Returns a list of ``(control_index, derivatives)`` pairs, one per
    nonzero basis function; ``derivatives[k]`` is the k-th derivative with
    respect to the parameter.
    """
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"parameter {u} outside [0, 1]")
    p = kv.degree
    if not 0 <= order <= p:
        raise OrderError(f"order must be in [0, {p}], got {order}")
    span = kv.span_index(u)
    ders = np.zeros((order + 1, p + 1))
    _kernels.basis_derivatives(kv.knots, p, span + p, float(u), order, ders)
    return [(span + j, ders[:, j].copy()) for j in range(p + 1)]


@dataclass(frozen=True, eq=False)
class GridData:
    """Scalar samples on a regular lattice over a rectangular domain."""

    values: np.ndarray
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] < 2 or vals.shape[1] < 2:
            raise ValueError("grid must be 2D with at least 2 samples per axis")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid contains non-finite values")
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ValueError("degenerate domain bounds")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self) -> tuple[float, float, float, float]:
        return (self.x1_min, self.x1_max, self.x2_min, self.x2_max)

    def save(self, path) -> None:
        save_grid(self, path)


@dataclass(frozen=True)
class SpanIndex:
    """One rectangular polynomial patch of a model."""

    i: int
    j: int
    bounds: tuple[float, float, float, float]  # (x1_lo, x1_hi, x2_lo, x2_hi)

    def contains(self, x1: float, x2: float) -> bool:
        lo1, hi1, lo2, hi2 = self.bounds
        return lo1 <= x1 <= hi1 and lo2 <= x2 <= hi2


@dataclass(frozen=True, eq=False)
class MfaModel:
    """Bivariate B-spline surface over a rectangular physical domain."""

    knots_u: KnotVector
    knots_v: KnotVector
    ctrl: np.ndarray
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    fit_rms: float | None = field(default=None, compare=False)
    fit_condition: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.knots_u.degree != self.knots_v.degree:
            raise ValueError("both dimensions must share one degree")
        ctrl = np.ascontiguousarray(np.asarray(self.ctrl, dtype=np.float64))
        ctrl.setflags(write=False)
        object.__setattr__(self, "ctrl", ctrl)
        if ctrl.shape != (self.knots_u.n_ctrl, self.knots_v.n_ctrl):
            raise ValueError(
                f"control grid {ctrl.shape} does not match knots "
                f"({self.knots_u.n_ctrl}, {self.knots_v.n_ctrl})")
        if not np.all(np.isfinite(ctrl)):
            raise ValueError("control points contain non-finite values")
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ValueError("degenerate domain bounds")

    # -- geometry ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return self.knots_u.degree

    @property
    def domain(self) -> tuple[float, float, float, float]:
        return (self.x1_min, self.x1_max, self.x2_min, self.x2_max)

    @property
    def n_spans_u(self) -> int:
        return self.knots_u.n_spans

    @property
    def n_spans_v(self) -> int:
        return self.knots_v.n_spans

    @property
    def span_lengths(self) -> tuple[float, float]:
        return ((self.x1_max - self.x1_min) / self.n_spans_u,
                (self.x2_max - self.x2_min) / self.n_spans_v)

    @cached_property
    def _kernel_args(self):
        return (self.degree, self.knots_u.knots, self.knots_v.knots,
                self.n_spans_u, self.n_spans_v, self.ctrl,
                self.x1_min, 1.0 / (self.x1_max - self.x1_min),
                self.x2_min, 1.0 / (self.x2_max - self.x2_min))

    def span_bounds(self, i: int, j: int) -> tuple[float, float, float, float]:
        lu, lv = self.span_lengths
        return (self.x1_min + i * lu, self.x1_min + (i + 1) * lu,
                self.x2_min + j * lv, self.x2_min + (j + 1) * lv)

    def span(self, i: int, j: int) -> SpanIndex:
        if not (0 <= i < self.n_spans_u and 0 <= j < self.n_spans_v):
            raise IndexError(f"span ({i}, {j}) out of range")
        return SpanIndex(i, j, self.span_bounds(i, j))

    def spans(self) -> list[SpanIndex]:
        return [self.span(i, j)
                for i in range(self.n_spans_u)
                for j in range(self.n_spans_v)]

    def span_of(self, x) -> SpanIndex:
        x1, x2 = float(x[0]), float(x[1])
        self._check_domain(x1, x2)
        u = (x1 - self.x1_min) / (self.x1_max - self.x1_min)
        v = (x2 - self.x2_min) / (self.x2_max - self.x2_min)
        i = int(_kernels.span_index(self.n_spans_u, u))
        j = int(_kernels.span_index(self.n_spans_v, v))
        return self.span(i, j)

    def _check_domain(self, x1: float, x2: float) -> None:
        if not (self.x1_min <= x1 <= self.x1_max
                and self.x2_min <= x2 <= self.x2_max):
            raise DomainError(
                f"point ({x1}, {x2}) outside domain "
                f"[{self.x1_min}, {self.x1_max}] x [{self.x2_min}, {self.x2_max}]")

    # -- queries ----------------------------------------------------------

    def evaluate(self, x, d1: int = 0, d2: int = 0) -> float:
        """Partial derivative d^(d1+d2) f / dx1^d1 dx2^d2 at a point."""
        x1, x2 = float(x[0]), float(x[1])
        self._check_domain(x1, x2)
        if d1 < 0 or d2 < 0 or d1 + d2 > 3:
            raise OrderError(f"unsupported derivative order ({d1}, {d2})")
        if d1 > self.degree or d2 > self.degree:
            raise OrderError(
                f"derivative order ({d1}, {d2}) exceeds degree {self.degree}")
        out = np.zeros(10)
        _kernels.model_partials(*self._kernel_args, x1, x2, d1 + d2, out)
        return float(out[_partial_slot(d1, d2)])

    def partials(self, pts: np.ndarray, order: int) -> np.ndarray:
        """All partials up to total ``order`` at many points, shape (N, 10).

        Column layout: f, f1, f2, f11, f12, f22, f111, f112, f122, f222;
        columns beyond the requested order are zero. Points are clamped to
        the domain (lenient batch path used by tracing and sampling).
        """
        if not 0 <= order <= 3:
            raise OrderError(f"order must be in [0, 3], got {order}")
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        out = np.zeros((pts.shape[0], 10))
        _kernels.model_partials_batch(*self._kernel_args, pts, order, out)
        return out

    def evaluate_many(self, pts: np.ndarray, d1: int = 0, d2: int = 0) -> np.ndarray:
        return self.partials(pts, d1 + d2)[:, _partial_slot(d1, d2)]

    def value_range(self) -> tuple[float, float]:
        """Convex-hull bounds on the surface values."""
        return float(self.ctrl.min()), float(self.ctrl.max())

    def derivative_control_points(self, dim: int) -> np.ndarray:
        """Control points of the first-derivative spline along ``dim``.

        The returned grid defines a degree ``p-1`` spline (in the chosen
        dimension) whose value equals the physical first derivative.
        """
        p = self.degree
        if dim == 1:
            knots = self.knots_u.knots
            diff = self.ctrl[1:, :] - self.ctrl[:-1, :]
            denom = knots[p + 1:p + 1 + diff.shape[0]] - knots[1:1 + diff.shape[0]]
            scale = p / (denom * (self.x1_max - self.x1_min))
            return diff * scale[:, None]
        if dim == 2:
            knots = self.knots_v.knots
            diff = self.ctrl[:, 1:] - self.ctrl[:, :-1]
            denom = knots[p + 1:p + 1 + diff.shape[1]] - knots[1:1 + diff.shape[1]]
            scale = p / (denom * (self.x2_max - self.x2_min))
            return diff * scale[None, :]
        raise ValueError(f"dim must be 1 or 2, got {dim}")

    def scaled(self, factor: float) -> "MfaModel":
        """Model representing ``factor * f`` (control points scale linearly)."""
        return MfaModel(self.knots_u, self.knots_v, self.ctrl * factor,
                        self.x1_min, self.x1_max, self.x2_min, self.x2_max)

    def save(self, path) -> None:
        save_model(self, path)


def _partial_slot(d1: int, d2: int) -> int:
    offsets = {0: 0, 1: 1, 2: 3, 3: 6}
    return offsets[d1 + d2] + d2


# -- fitting ---------------------------------------------------------------

def _basis_matrix(kv: KnotVector, params: np.ndarray) -> np.ndarray:
    p = kv.degree
    mat = np.zeros((params.size, kv.n_ctrl))
    ders = np.zeros((1, p + 1))
    for row, u in enumerate(params):
        span = kv.span_index(float(u))
        _kernels.basis_derivatives(kv.knots, p, span + p, float(u), 0, ders)
        mat[row, span:span + p + 1] = ders[0]
    return mat


def _solve_normal(gram: np.ndarray, rhs: np.ndarray, label: str):
    """Solve gram @ X = rhs, falling back to a tiny ridge if singular."""
    condition = None
    try:
        chol = np.linalg.cholesky(gram)
        x = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        return x, condition
    except np.linalg.LinAlgError:
        condition = float(np.linalg.cond(gram))
        warnings.warn(
            f"normal system for {label} is singular (cond ~ {condition:.3e}); "
            "adding 1e-12 ridge", stacklevel=3)
        ridged = gram + 1e-12 * np.eye(gram.shape[0])
        try:
            x = np.linalg.solve(ridged, rhs)
        except np.linalg.LinAlgError as exc:
            raise FitError(
                f"normal system for {label} is singular even with ridge "
                f"(cond ~ {condition:.3e})") from exc
        return x, condition


def fit(data: GridData, degree: int, n_ctrl_u: int, n_ctrl_v: int) -> MfaModel:
    """Least-squares B-spline fit of lattice samples.

    Samples are parameterized uniformly per dimension, which makes the 2D
    least-squares problem separable: the optimal control grid solves the
    two 1D normal systems in sequence.
    """
    if degree < 1:
        raise FitError(f"degree must be >= 1, got {degree}")
    if n_ctrl_u < degree + 1 or n_ctrl_v < degree + 1:
        raise FitError("need at least degree+1 control points per dimension")
    if n_ctrl_u > data.nx or n_ctrl_v > data.ny:
        raise FitError(
            f"underdetermined fit: {n_ctrl_u}x{n_ctrl_v} control points "
            f"from {data.nx}x{data.ny} samples")
    kv_u = KnotVector.clamped_uniform(degree, n_ctrl_u)
    kv_v = KnotVector.clamped_uniform(degree, n_ctrl_v)
    bu = _basis_matrix(kv_u, np.linspace(0.0, 1.0, data.nx))
    bv = _basis_matrix(kv_v, np.linspace(0.0, 1.0, data.ny))
    rhs = bu.T @ data.values @ bv
    x, cond_u = _solve_normal(bu.T @ bu, rhs, "dimension 1")
    ctrl_t, cond_v = _solve_normal(bv.T @ bv, x.T, "dimension 2")
    ctrl = ctrl_t.T
    resid = bu @ ctrl @ bv.T - data.values
    rms = float(np.sqrt(np.mean(resid ** 2)))
    condition = max(c for c in (cond_u, cond_v, 0.0) if c is not None) or None
    return MfaModel(kv_u, kv_v, ctrl,
                    data.x1_min, data.x1_max, data.x2_min, data.x2_max,
                    fit_rms=rms, fit_condition=condition)


# -- model and grid files ---------------------------------------------------

def save_model(model: MfaModel, path) -> None:
    doc = {
        "degree": model.degree,
        "knots_u": model.knots_u.knots.tolist(),
        "knots_v": model.knots_v.knots.tolist(),
        "ctrl_rows": model.ctrl.shape[0],
        "ctrl_cols": model.ctrl.shape[1],
        "ctrl": model.ctrl.ravel().tolist(),
        "domain": {
            "x1_min": model.x1_min, "x1_max": model.x1_max,
            "x2_min": model.x2_min, "x2_max": model.x2_max,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> MfaModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid model file {path}",
                             context=f"line {exc.lineno}") from exc
    for key in ("degree", "knots_u", "knots_v", "ctrl_rows", "ctrl_cols",
                "ctrl", "domain"):
        if key not in doc:
            raise ParseError("missing model field", context=key)
    rows, cols = int(doc["ctrl_rows"]), int(doc["ctrl_cols"])
    ctrl = np.asarray(doc["ctrl"], dtype=np.float64)
    if ctrl.size != rows * cols:
        raise ParseError(
            f"ctrl has {ctrl.size} entries, expected {rows}x{cols}",
            context="ctrl")
    try:
        kv_u = KnotVector(int(doc["degree"]), np.asarray(doc["knots_u"]))
        kv_v = KnotVector(int(doc["degree"]), np.asarray(doc["knots_v"]))
    except ValueError as exc:
        raise ParseError(f"invalid knot vector: {exc}", context="knots") from exc
    dom = doc["domain"]
    try:
        model = MfaModel(kv_u, kv_v, ctrl.reshape(rows, cols),
                         float(dom["x1_min"]), float(dom["x1_max"]),
                         float(dom["x2_min"]), float(dom["x2_max"]))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"inconsistent model file: {exc}") from exc
    return model


def save_grid(grid: GridData, path) -> None:
    """Write grid samples as CSV: a header line, then one row per x1 value."""
    with open(path, "w") as fh:
        fh.write(f"{grid.nx},{grid.ny},{float(grid.x1_min)!r},"
                 f"{float(grid.x1_max)!r},{float(grid.x2_min)!r},"
                 f"{float(grid.x2_max)!r}\n")
        for row in grid.values:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_grid(path) -> GridData:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid grid file {path}",
                                 context=f"line {exc.lineno}") from exc
        try:
            values = np.asarray(doc["values"], dtype=np.float64)
            values = values.reshape(int(doc["nx"]), int(doc["ny"]))
            return GridData(values, *(float(doc["domain"][k]) for k in
                                      ("x1_min", "x1_max", "x2_min", "x2_max")))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"inconsistent grid file: {exc}") from exc
    with open(path) as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        if len(parts) != 6:
            raise ParseError("grid header must be nx,ny,x1_min,x1_max,x2_min,x2_max",
                             context="line 1")
        try:
            nx, ny = int(parts[0]), int(parts[1])
            bounds = [float(v) for v in parts[2:]]
        except ValueError as exc:
            raise ParseError(f"bad grid header: {exc}", context="line 1") from exc
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError as exc:
                raise ParseError(f"bad grid row: {exc}",
                                 context=f"line {lineno}") from exc
            if len(row) != ny:
                raise ParseError(
                    f"grid row has {len(row)} values, expected {ny}",
                    context=f"line {lineno}")
            rows.append(row)
        if len(rows) != nx:
            raise ParseError(f"grid has {len(rows)} rows, expected {nx}")
    return GridData(np.asarray(rows), *bounds)
