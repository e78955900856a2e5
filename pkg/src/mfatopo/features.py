"""High-level extraction drivers.

Contours come straight from the tracer. Jacobi sets are the zero contour of
the gradient-alignment determinant of two models; ridge-valley graphs are
the zero contour of the same determinant with the squared gradient
magnitude substituted for the second field. Both derived cases insert
critical points (of the determinant field and of the base model,
respectively) and the ridge-valley driver additionally labels every regular
vertex by the signs of the second directional derivatives along the contour
tangent.
"""

from __future__ import annotations

import numpy as np

from .critical import NewtonConfig, extract_critical_points
from .errors import DegeneracyError, DomainError
from .fields import JacobiField, RidgeValleyField, ScalarField, SplineField
from .graph import (KIND_REGULAR, LABEL_NAMES, LABEL_PSEUDO_RIDGE,
                    LABEL_PSEUDO_VALLEY, LABEL_RIDGE, LABEL_UNCLASSIFIED,
                    LABEL_VALLEY, TopoGraph)
from .graph import KIND_DEGENERATE
from .model import MfaModel
from .tracing import (TraceConfig, connect, remove_duplicates, trace_all,
                      warn_if_capped)

DEFAULT_CLASS_TOL = 1e-9


# -- derived-field queries (thin, explicit entry points) ----------------------

def h_value(fields: JacobiField, pts) -> np.ndarray:
    return fields.value(np.atleast_2d(pts))


def h_gradient(fields: JacobiField, pts) -> np.ndarray:
    return fields.gradient(np.atleast_2d(pts))


def h_hessian(fields: JacobiField, pts) -> np.ndarray:
    return fields.hessian(np.atleast_2d(pts))


def htilde_value(field: RidgeValleyField, pts) -> np.ndarray:
    return field.value(np.atleast_2d(pts))


def htilde_gradient(field: RidgeValleyField, pts) -> np.ndarray:
    return field.gradient(np.atleast_2d(pts))


# -- degeneracy guard ----------------------------------------------------------

def _check_not_degenerate(field: ScalarField, cfg: TraceConfig) -> None:
    """Abort on derived fields that vanish identically.

    Samples the field on the seeding lattice density; an everywhere-tiny
    magnitude means the zero set is the whole domain and tracing would only
    chase numerical noise.
    """
    per_dim = cfg.seeds_for(field)
    nsu, nsv = field.n_spans
    x1_min, x1_max, x2_min, x2_max = field.domain
    xs = np.linspace(x1_min, x1_max, nsu * per_dim + 1)
    ys = np.linspace(x2_min, x2_max, nsv * per_dim + 1)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    peak = float(np.abs(field.value(pts)).max())
    if peak < cfg.epsilon:
        raise DegeneracyError(
            f"derived field is identically ~0 (max |value| {peak:.2e} < "
            f"epsilon {cfg.epsilon:.2e}); its zero set is the whole domain")


def _newton_config(cfg: TraceConfig, field: ScalarField) -> NewtonConfig:
    return NewtonConfig(dedup_radius=cfg.step,
                        seeds_per_dim=cfg.seeds_for(field))


# -- extraction drivers ---------------------------------------------------------

def extract_contour(model: MfaModel, isovalue: float,
                    cfg: TraceConfig | None = None,
                    threads: int = 1) -> TopoGraph:
    """Isocontour of the model surface as a graph."""
    field = SplineField(model)
    if cfg is None:
        cfg = TraceConfig.for_field(field)
    lo, hi = model.value_range()
    if not lo <= isovalue <= hi:
        return TopoGraph.empty()
    criticals = extract_critical_points(field, _newton_config(cfg, field),
                                        threads)
    trajectories = remove_duplicates(trace_all(field, isovalue, cfg, threads),
                                     cfg)
    warn_if_capped(trajectories)
    return connect(trajectories, criticals, field, isovalue, cfg)


def extract_jacobi(f: MfaModel, g: MfaModel,
                   cfg: TraceConfig | None = None,
                   threads: int = 1) -> TopoGraph:
    """Jacobi set of two models sharing one knot layout."""
    field = JacobiField(f, g)
    if cfg is None:
        cfg = TraceConfig.for_field(field)
    _check_not_degenerate(field, cfg)
    criticals = extract_critical_points(field, _newton_config(cfg, field),
                                        threads)
    # degenerate-Hessian roots of the determinant live in near-flat regions
    # and carry no reliable position; keep only classified ones
    criticals = [c for c in criticals if c.kind != KIND_DEGENERATE]
    trajectories = remove_duplicates(trace_all(field, 0.0, cfg, threads), cfg)
    warn_if_capped(trajectories)
    return connect(trajectories, criticals, field, 0.0, cfg)


def extract_ridge_valley(f: MfaModel, cfg: TraceConfig | None = None,
                         threads: int = 1) -> TopoGraph:
    """Ridge-valley graph of a model, with per-vertex arc classification."""
    field = RidgeValleyField(f)
    if cfg is None:
        cfg = TraceConfig.for_field(field)
    _check_not_degenerate(field, cfg)
    base = SplineField(f)
    criticals = extract_critical_points(
        base, NewtonConfig(dedup_radius=cfg.step), threads)
    trajectories = remove_duplicates(trace_all(field, 0.0, cfg, threads), cfg)
    warn_if_capped(trajectories)
    graph = connect(trajectories, criticals, field, 0.0, cfg)
    graph.labels = _label_vertices(f, graph, cfg.min_gradient)
    return graph


# -- ridge/valley point classification ------------------------------------------

def _directional_signs(model: MfaModel, pts: np.ndarray):
    """(f_mm, g_mm, |grad f|) along the contour tangent at many points."""
    part = model.partials(np.atleast_2d(pts), 3)
    f1, f2 = part[:, 1], part[:, 2]
    f11, f12, f22 = part[:, 3], part[:, 4], part[:, 5]
    f111, f112, f122, f222 = part[:, 6], part[:, 7], part[:, 8], part[:, 9]
    gn = np.hypot(f1, f2)
    safe = np.where(gn > 0, gn, 1.0)
    m1, m2 = -f2 / safe, f1 / safe
    f_mm = m1 * m1 * f11 + 2.0 * m1 * m2 * f12 + m2 * m2 * f22
    g11 = 2.0 * (f11 * f11 + f111 * f1 + f112 * f2 + f12 * f12)
    g12 = 2.0 * (f112 * f1 + f11 * f12 + f122 * f2 + f12 * f22)
    g22 = 2.0 * (f122 * f1 + f12 * f12 + f22 * f22 + f222 * f2)
    g_mm = m1 * m1 * g11 + 2.0 * m1 * m2 * g12 + m2 * m2 * g22
    return f_mm, g_mm, gn


def _sign_pair_label(f_mm: float, g_mm: float,
                     class_tol: float = DEFAULT_CLASS_TOL) -> int:
    if abs(f_mm) < class_tol or abs(g_mm) < class_tol:
        return LABEL_UNCLASSIFIED
    if g_mm > 0:
        return LABEL_RIDGE if f_mm < 0 else LABEL_VALLEY
    return LABEL_PSEUDO_RIDGE if f_mm < 0 else LABEL_PSEUDO_VALLEY


def classify_rv(f: MfaModel, x, class_tol: float = DEFAULT_CLASS_TOL,
                min_gradient: float = 1e-12) -> str:
    """Arc class of a ridge-valley graph point (undefined at criticals)."""
    f_mm, g_mm, gn = _directional_signs(f, np.asarray(x, dtype=float))
    if gn[0] <= min_gradient:
        raise DomainError("classification undefined where the gradient vanishes")
    return LABEL_NAMES[_sign_pair_label(float(f_mm[0]), float(g_mm[0]),
                                        class_tol)]


def _label_vertices(f: MfaModel, graph: TopoGraph,
                    min_gradient: float) -> np.ndarray:
    labels = np.full(graph.n_vertices, LABEL_UNCLASSIFIED, dtype=np.int8)
    regular = graph.kinds == KIND_REGULAR
    if not regular.any():
        return labels
    f_mm, g_mm, gn = _directional_signs(f, graph.positions[regular])
    out = np.fromiter(
        (_sign_pair_label(a, b) if g > min_gradient else LABEL_UNCLASSIFIED
         for a, b, g in zip(f_mm, g_mm, gn)),
        dtype=np.int8, count=int(regular.sum()))
    labels[regular] = out
    return labels
