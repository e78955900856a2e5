"""Critical-point extraction: span filtration, Newton iteration, dedup.

Spans of a plain spline field are filtered by the convex-hull argument on
first-derivative control points (a span whose derivative control points are
all strictly positive, or all strictly negative, in some dimension cannot
contain a zero of the gradient). Derived fields have no explicit control
points, so every span is processed for them. Surviving spans are seeded
with a uniform lattice and refined by Newton iteration confined to the
span; results are merged deterministically and deduplicated with a spatial
hash.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels
from ._parallel import parallel_map
from .fields import ScalarField, SplineField
from .graph import KIND_NAMES
from .model import SpanIndex


@dataclass(frozen=True)
class NewtonConfig:
    """Knobs for Newton refinement and deduplication."""

    dedup_radius: float
    max_iters: int = 100
    gradient_tol: float = 1e-10
    degenerate_tol: float = 1e-12
    seeds_per_dim: int | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.gradient_tol <= 0:
            raise ValueError("gradient_tol must be positive")
        if self.dedup_radius <= 0:
            raise ValueError("dedup_radius must be positive")


@dataclass(frozen=True)
class CriticalPoint:
    position: tuple[float, float]
    value: float
    kind: int  # KIND_* code from graph.py

    @property
    def kind_name(self) -> str:
        return KIND_NAMES[self.kind]


def seed_lattice(bounds, per_dim: int) -> np.ndarray:
    """Uniform seeds over a span: the two boundary values plus evenly
    spaced interior points per dimension."""
    lo1, hi1, lo2, hi2 = bounds
    xs = np.linspace(lo1, hi1, per_dim)
    ys = np.linspace(lo2, hi2, per_dim)
    return np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)


def filter_spans(field: SplineField) -> list[SpanIndex]:
    """Spans that may contain critical points of a plain spline field."""
    p = field.model.degree
    q1 = field.derivative_control_points(1)  # (n1-1, n2)
    q2 = field.derivative_control_points(2)  # (n1, n2-1)
    w1 = sliding_window_view(q1, (p, p + 1))
    w2 = sliding_window_view(q2, (p + 1, p))
    no_zero_u = (w1.min(axis=(2, 3)) > 0) | (w1.max(axis=(2, 3)) < 0)
    no_zero_v = (w2.min(axis=(2, 3)) > 0) | (w2.max(axis=(2, 3)) < 0)
    keep = ~(no_zero_u | no_zero_v)
    return [field.model.span(i, j) for i, j in np.argwhere(keep)]


def newton_refine(field: ScalarField, x0, span: SpanIndex,
                  cfg: NewtonConfig) -> CriticalPoint | None:
    """Refine one seed; None on divergence, singular Hessian, or span exit."""
    seeds = np.asarray(x0, dtype=np.float64).reshape(1, 2)
    pts = np.empty((1, 2))
    kind = np.empty(1, dtype=np.int64)
    _kernels.newton_batch(*field._kargs, seeds, cfg.gradient_tol,
                          cfg.max_iters, cfg.degenerate_tol, *span.bounds,
                          pts, kind)
    if kind[0] < 0:
        return None
    value = float(field.value(pts)[0])
    return CriticalPoint((float(pts[0, 0]), float(pts[0, 1])), value,
                         int(kind[0]))


def classify(field: ScalarField, x, degenerate_tol: float = 1e-12) -> str:
    """Hessian sign classification at a point."""
    hess = field.hessian(np.asarray(x, dtype=float).reshape(1, 2))[0]
    det = hess[0, 0] * hess[1, 1] - hess[0, 1] ** 2
    if abs(det) <= degenerate_tol:
        return "degenerate"
    if det < 0:
        return "saddle"
    return "minimum" if hess[0, 0] + hess[1, 1] > 0 else "maximum"


def _span_criticals(field: ScalarField, span: SpanIndex, cfg: NewtonConfig,
                    per_dim: int):
    seeds = seed_lattice(span.bounds, per_dim)
    pts = np.empty_like(seeds)
    kinds = np.empty(seeds.shape[0], dtype=np.int64)
    _kernels.newton_batch(*field._kargs, seeds, cfg.gradient_tol,
                          cfg.max_iters, cfg.degenerate_tol, *span.bounds,
                          pts, kinds)
    ok = kinds >= 0
    return pts[ok], kinds[ok]


def _dedup(points: np.ndarray, kinds: np.ndarray, radius: float):
    """Spatial-hash dedup; first point in lexicographic order wins."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    cells: dict[tuple[int, int], list[int]] = {}
    kept: list[int] = []
    for idx in order:
        x1, x2 = points[idx]
        ci, cj = int(np.floor(x1 / radius)), int(np.floor(x2 / radius))
        dup = False
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for other in cells.get((ci + di, cj + dj), ()):
                    d = np.hypot(points[other, 0] - x1, points[other, 1] - x2)
                    if d < radius:
                        dup = True
                        break
                if dup:
                    break
            if dup:
                break
        if not dup:
            kept.append(idx)
            cells.setdefault((ci, cj), []).append(idx)
    kept_arr = np.array(kept, dtype=np.int64)
    return points[kept_arr], kinds[kept_arr]


def extract_critical_points(field: ScalarField, cfg: NewtonConfig,
                            threads: int = 1) -> list[CriticalPoint]:
    """All critical points of a field, deduplicated and sorted by position."""
    if getattr(field, "filtration_available", False):
        scale = max(1.0, np.abs(field.model.ctrl).max())
        flat = all(np.abs(field.derivative_control_points(d)).max()
                   < 1e-12 * scale for d in (1, 2))
        if flat:
            warnings.warn("field is constant to machine precision; "
                          "reporting no critical points", stacklevel=2)
            return []
        spans = filter_spans(field)
    else:
        spans = field.spans()
    per_dim = cfg.seeds_per_dim or (field.effective_degree + 3)
    results = parallel_map(
        lambda span: _span_criticals(field, span, cfg, per_dim),
        spans, threads)
    if not results:
        return []
    points = np.concatenate([r[0] for r in results], axis=0)
    kinds = np.concatenate([r[1] for r in results], axis=0)
    if points.shape[0] == 0:
        return []
    points, kinds = _dedup(points, kinds, cfg.dedup_radius)
    values = field.value(points)
    return [CriticalPoint((float(p[0]), float(p[1])), float(v), int(k))
            for p, v, k in zip(points, values, kinds)]


def save_criticals_csv(points: list[CriticalPoint], path) -> None:
    with open(path, "w") as fh:
        fh.write("x1,x2,value,kind\n")
        for cp in points:
            fh.write(f"{cp.position[0]!r},{cp.position[1]!r},"
                     f"{cp.value!r},{cp.kind_name}\n")
