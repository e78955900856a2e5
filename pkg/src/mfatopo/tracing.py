"""Isocontour tracing over any twice-differentiable scalar field.

The pipeline runs span by span: seed a uniform lattice, pull seeds onto the
isocontour with normalized gradient descent, trace each starting point with
fourth-order Runge-Kutta steps along the contour tangent (correcting drift
at every point), remove duplicated trajectories, and finally connect
trajectories and inserted critical points into one graph.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from ._parallel import parallel_map
from .critical import CriticalPoint
from .errors import DomainError
from .fields import ScalarField
from .graph import KIND_REGULAR, TopoGraph
from .model import SpanIndex

STOP_INTERIOR = _kernels.STOP_INTERIOR
STOP_BOUNDARY = _kernels.STOP_BOUNDARY
STOP_NEAR_CRITICAL = _kernels.STOP_NEAR_CRITICAL
STOP_CAP = _kernels.STOP_CAP

STOP_NAMES = {
    STOP_INTERIOR: "interior-stop",
    STOP_BOUNDARY: "boundary-stop",
    STOP_NEAR_CRITICAL: "near-critical-stop",
    STOP_CAP: "interior-stop",  # cap also ends inside the span
}


@dataclass(frozen=True)
class TraceConfig:
    """Tracing knobs; distances are in physical units.

    ``connect_radius`` (the endpoint connection threshold) defaults to twice
    the step; ``seeds_per_dim`` defaults to the field's effective polynomial
    degree plus three.
    """

    step: float
    epsilon: float = 1e-10
    connect_radius: float | None = None
    seeds_per_dim: int | None = None
    max_refine_iters: int = 100
    min_gradient: float = 1e-12
    step_cap_factor: float = 10.0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.connect_radius is None:
            object.__setattr__(self, "connect_radius", 2.0 * self.step)
        if self.connect_radius < self.step:
            raise ValueError("connect_radius must be >= step")

    @classmethod
    def for_field(cls, field: ScalarField, step_divisor: float = 4.0,
                  gamma_mult: float = 2.0, **kwargs) -> "TraceConfig":
        """Derive a config from the field's span length.

        ``step = span_length / step_divisor`` with divisor >= 2 so tracing
        fits in every span.
        """
        if step_divisor < 2:
            raise ValueError("step_divisor must be >= 2 (step <= half a span)")
        step = field.span_length / step_divisor
        return cls(step=step, connect_radius=gamma_mult * step, **kwargs)

    def seeds_for(self, field: ScalarField) -> int:
        return self.seeds_per_dim or (field.effective_degree + 3)


@dataclass
class Trajectory:
    """An ordered polyline traced within one span."""

    points: np.ndarray            # (n, 2)
    closed: bool
    span: SpanIndex
    start_stop: int = STOP_INTERIOR
    end_stop: int = STOP_INTERIOR
    warning: bool = False         # step cap was hit

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def arc_length(self) -> float:
        if self.n_points < 2:
            return 0.0
        return float(np.hypot(*np.diff(self.points, axis=0).T).sum())


def tangent(field: ScalarField, x, gradient=None) -> np.ndarray:
    """Unit tangent of the contour through x (perpendicular to the
    gradient, rotated counterclockwise)."""
    if gradient is None:
        gradient = field.gradient(np.asarray(x, dtype=float).reshape(1, 2))[0]
    g1, g2 = float(gradient[0]), float(gradient[1])
    norm = math.hypot(g1, g2)
    if norm <= 1e-12:
        raise DomainError("gradient vanishes: near-critical point")
    return np.array([-g2 / norm, g1 / norm])


def find_starting_points(field: ScalarField, isovalue: float,
                         span: SpanIndex, cfg: TraceConfig) -> np.ndarray:
    """Points on the isocontour inside the span, pairwise >= step apart."""
    from .critical import seed_lattice

    seeds = seed_lattice(span.bounds, cfg.seeds_for(field))
    pts = np.empty_like(seeds)
    ok = np.zeros(seeds.shape[0], dtype=np.bool_)
    _kernels.descent_batch(*field._kargs, seeds, isovalue, cfg.epsilon,
                           cfg.max_refine_iters, cfg.min_gradient,
                           *span.bounds, pts, ok)
    pts = pts[ok]
    if pts.shape[0] == 0:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    kept: list[np.ndarray] = []
    for p in pts:
        if all(np.hypot(*(p - q)) >= cfg.step for q in kept):
            kept.append(p)
    return np.asarray(kept)


def rk4_step(field: ScalarField, x, step: float, direction: int = 1,
             min_gradient: float = 1e-12) -> np.ndarray:
    """One Runge-Kutta step along the contour tangent."""
    ok, n1, n2 = _kernels.rk4_step_kernel(
        *field._kargs, float(x[0]), float(x[1]), float(step),
        float(direction), min_gradient)
    if not ok:
        raise DomainError("gradient vanished during a Runge-Kutta stage")
    return np.array([n1, n2])


def correct(field: ScalarField, isovalue: float, x,
            cfg: TraceConfig) -> np.ndarray | None:
    """Pull a drifted point back onto the contour; None on failure."""
    ok, x1, x2 = _kernels.correct_point(
        *field._kargs, float(x[0]), float(x[1]), isovalue, cfg.epsilon,
        cfg.max_refine_iters, cfg.min_gradient)
    return np.array([x1, x2]) if ok else None


def _max_steps(span: SpanIndex, cfg: TraceConfig) -> int:
    lo1, hi1, lo2, hi2 = span.bounds
    perimeter = 2.0 * ((hi1 - lo1) + (hi2 - lo2))
    return max(16, int(math.ceil(cfg.step_cap_factor * perimeter / cfg.step)))


def trace_trajectory(field: ScalarField, isovalue: float, start,
                     span: SpanIndex, cfg: TraceConfig) -> Trajectory:
    """Forward/backward trace of the contour piece through ``start``."""
    start = np.asarray(start, dtype=np.float64)
    cap = _max_steps(span, cfg)
    buf = np.empty((cap, 2))
    n_fwd, stop_fwd, closed = _kernels.trace_path(
        *field._kargs, float(start[0]), float(start[1]), isovalue,
        cfg.step, 1.0, cfg.epsilon, cfg.max_refine_iters, cfg.min_gradient,
        *span.bounds, True, cap, buf)
    forward = buf[:n_fwd].copy()
    if closed:
        points = np.concatenate([start.reshape(1, 2), forward], axis=0)
        return Trajectory(points, True, span,
                          warning=stop_fwd == STOP_CAP)
    buf2 = np.empty((cap, 2))
    n_bwd, stop_bwd, _ = _kernels.trace_path(
        *field._kargs, float(start[0]), float(start[1]), isovalue,
        cfg.step, -1.0, cfg.epsilon, cfg.max_refine_iters, cfg.min_gradient,
        *span.bounds, False, cap, buf2)
    backward = buf2[:n_bwd][::-1].copy()
    points = np.concatenate([backward, start.reshape(1, 2), forward], axis=0)
    return Trajectory(points, False, span, start_stop=stop_bwd,
                      end_stop=stop_fwd,
                      warning=STOP_CAP in (stop_fwd, stop_bwd))


def trace_span(field: ScalarField, isovalue: float, span: SpanIndex,
               cfg: TraceConfig) -> list[Trajectory]:
    starts = find_starting_points(field, isovalue, span, cfg)
    return [trace_trajectory(field, isovalue, s, span, cfg) for s in starts]


def trace_all(field: ScalarField, isovalue: float, cfg: TraceConfig,
              threads: int = 1) -> list[Trajectory]:
    """Seed and trace every span; trajectories come back in span order."""
    if cfg.step > 0.5 * field.span_length * (1 + 1e-12):
        raise ValueError("step must not exceed half the span length")
    per_span = parallel_map(
        lambda span: trace_span(field, isovalue, span, cfg),
        field.spans(), threads)
    return [traj for spanned in per_span for traj in spanned]


# -- duplication removal ------------------------------------------------------


class _PointHash:
    """Spatial hash answering 'is a like-oriented point within ``radius``'.

    Distinct contour branches can pass closer than the step near saddles;
    unlike true re-traces of one piece, their tangent directions oppose
    (the tangent is a function of the field, so every trace of one piece
    runs the same way). Correspondence therefore requires both proximity
    and a non-negative direction dot product.
    """

    def __init__(self, radius: float):
        self.radius = radius
        self.cells: dict[tuple[int, int], list[np.ndarray]] = {}

    def add_all(self, pts: np.ndarray, dirs: np.ndarray) -> None:
        r = self.radius
        for p, d in zip(pts, dirs):
            key = (int(math.floor(p[0] / r)), int(math.floor(p[1] / r)))
            self.cells.setdefault(key, []).append(
                np.array([p[0], p[1], d[0], d[1]]))

    def near(self, p, d) -> bool:
        r = self.radius
        ci = int(math.floor(p[0] / r))
        cj = int(math.floor(p[1] / r))
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for q in self.cells.get((ci + di, cj + dj), ()):
                    if math.hypot(p[0] - q[0], p[1] - q[1]) >= r:
                        continue
                    dot = d[0] * q[2] + d[1] * q[3]
                    aligned = (dot >= 0.0
                               or (d[0] == 0.0 and d[1] == 0.0)
                               or (q[2] == 0.0 and q[3] == 0.0))
                    if aligned:
                        return True
        return False


def _polyline_directions(pts: np.ndarray) -> np.ndarray:
    """Unit tangent estimate per polyline point (zeros for single points)."""
    n = pts.shape[0]
    dirs = np.zeros_like(pts)
    if n < 2:
        return dirs
    dirs[:-1] += np.diff(pts, axis=0)
    dirs[1:] += np.diff(pts, axis=0)
    norms = np.hypot(dirs[:, 0], dirs[:, 1])
    norms[norms == 0.0] = 1.0
    return dirs / norms[:, None]


def _longest_cyclic_run(mask: np.ndarray) -> tuple[int, int]:
    """(start, length) of the longest cyclic run of True values."""
    n = mask.size
    if mask.all():
        return 0, n
    doubled = np.concatenate([mask, mask])
    best_start, best_len = 0, 0
    run = 0
    for i in range(2 * n):
        if doubled[i]:
            run += 1
            if run > best_len and i - run + 1 < n:
                best_len = min(run, n)
                best_start = i - run + 1
        else:
            run = 0
    return best_start, best_len


def remove_duplicates(trajectories: list[Trajectory],
                      cfg: TraceConfig) -> list[Trajectory]:
    """Drop or trim trajectory segments already covered by another trace.

    Two like-oriented points closer than ``step`` correspond. Working span
    by span from the longest trajectory down, each candidate is matched
    pointwise against everything already kept in the span; duplicated runs
    adjacent to its endpoints are removed, keeping a single junction point
    so the connection stage can re-join the pieces.
    """
    by_span: dict[tuple[int, int], list[Trajectory]] = {}
    for traj in trajectories:
        by_span.setdefault((traj.span.i, traj.span.j), []).append(traj)
    kept_all: list[Trajectory] = []
    for span_key in sorted(by_span):
        group = sorted(
            by_span[span_key],
            key=lambda t: (-t.n_points, t.points[0, 0], t.points[0, 1]))
        accepted: list[Trajectory] = []
        hash_ = _PointHash(cfg.step)
        for cand in group:
            if not accepted:
                accepted.append(cand)
                hash_.add_all(cand.points, _polyline_directions(cand.points))
                continue
            dirs = _polyline_directions(cand.points)
            matched = np.fromiter(
                (hash_.near(p, d) for p, d in zip(cand.points, dirs)),
                dtype=bool, count=cand.n_points)
            trimmed = _trim(cand, matched)
            if trimmed is not None:
                accepted.append(trimmed)
                hash_.add_all(trimmed.points,
                              _polyline_directions(trimmed.points))
        kept_all.extend(accepted)
    return kept_all


def _trim(traj: Trajectory, matched: np.ndarray) -> Trajectory | None:
    n = traj.n_points
    if matched.all():
        return None
    if not matched.any():
        return traj
    if traj.closed:
        start, length = _longest_cyclic_run(matched)
        if length < 2:
            return traj
        # open the loop, dropping the duplicated run except one junction
        # point at each end
        end = (start + length - 1) % n
        order = [(end + k) % n for k in range(n - length + 2)]
        points = traj.points[order]
        return replace(traj, points=points, closed=False,
                       start_stop=STOP_INTERIOR, end_stop=STOP_INTERIOR)
    head = 0
    while head < n and matched[head]:
        head += 1
    tail = 0
    while tail < n - head and matched[n - 1 - tail]:
        tail += 1
    if head + tail >= n - 1:
        # fully duplicated up to at most one fresh point
        return None
    lo = head - 1 if head >= 2 else 0
    hi = n - (tail - 1) if tail >= 2 else n
    if hi - lo < 2:
        return None
    if lo == 0 and hi == n:
        return traj
    points = traj.points[lo:hi]
    return replace(traj, points=points,
                   start_stop=STOP_INTERIOR if lo > 0 else traj.start_stop,
                   end_stop=STOP_INTERIOR if hi < n else traj.end_stop)


# -- connection ---------------------------------------------------------------


def connect(trajectories: list[Trajectory], criticals: list[CriticalPoint],
            field: ScalarField, isovalue: float,
            cfg: TraceConfig) -> TopoGraph:
    """Assemble trajectories and critical points into the final graph.

    Critical points with |field - isovalue| < epsilon become vertices (their
    valence is unrestricted). Each open-trajectory endpoint then receives at
    most one connection edge, tried in priority order: nearest inserted
    critical point, nearest endpoint in an adjacent span, nearest endpoint
    within its own span. Endpoint-to-endpoint junctions must continue the
    flow (every trajectory runs along the same field-defined tangent
    orientation, so a junction joins the end of one polyline to the start
    of another). All matches are limited to ``connect_radius`` and resolved
    greedily by distance (ties by vertex id).
    """
    gamma = cfg.connect_radius
    traj_points = [t.points for t in trajectories]
    offsets = np.cumsum([0] + [p.shape[0] for p in traj_points])
    n_traj_vertices = int(offsets[-1])

    kept_criticals = []
    if criticals:
        pos = np.array([c.position for c in criticals])
        vals = field.value(pos)
        for c, v in zip(criticals, vals):
            if abs(v - isovalue) < cfg.epsilon:
                kept_criticals.append(c)
        kept_criticals.sort(key=lambda c: c.position)
    crit_ids = {id(c): n_traj_vertices + k
                for k, c in enumerate(kept_criticals)}

    n_vertices = n_traj_vertices + len(kept_criticals)
    if n_vertices == 0:
        return TopoGraph.empty()
    positions = np.empty((n_vertices, 2))
    kinds = np.zeros(n_vertices, dtype=np.int8)
    for t_idx, pts in enumerate(traj_points):
        positions[offsets[t_idx]:offsets[t_idx + 1]] = pts
    for c in kept_criticals:
        vid = crit_ids[id(c)]
        positions[vid] = c.position
        kinds[vid] = c.kind

    edges: set[tuple[int, int]] = set()

    def add_edge(a: int, b: int) -> None:
        if a != b:
            edges.add((a, b) if a < b else (b, a))

    # consecutive points within each trajectory (closed ones wrap)
    for t_idx, traj in enumerate(trajectories):
        base = offsets[t_idx]
        for k in range(traj.n_points - 1):
            add_edge(base + k, base + k + 1)
        if traj.closed and traj.n_points >= 3:
            add_edge(base + traj.n_points - 1, base)

    # endpoint records: (vertex id, trajectory index, is_tail); a
    # single-point trajectory is a degenerate arc, so its vertex acts as
    # both head and tail (two records, two connection slots)
    endpoints: list[tuple[int, int, bool]] = []
    for t_idx, traj in enumerate(trajectories):
        if traj.closed:
            continue
        base = offsets[t_idx]
        endpoints.append((base, t_idx, False))
        endpoints.append((base + max(traj.n_points - 1, 0), t_idx, True))
    free: dict[int, int] = {}
    for vid, _, _ in endpoints:
        free[vid] = free.get(vid, 0) + 1

    # 1. endpoints to the nearest critical point
    if kept_criticals:
        crit_pos = positions[n_traj_vertices:]
        for vid, _, _ in endpoints:
            if free.get(vid, 0) <= 0:
                continue
            d = np.hypot(*(crit_pos - positions[vid]).T)
            best = int(np.argmin(d))
            if d[best] <= gamma:
                target = n_traj_vertices + best
                key = (vid, target) if vid < target else (target, vid)
                if key not in edges:
                    add_edge(vid, target)
                    free[vid] -= 1

    def joinable(tail_rec, head_rec) -> bool:
        # flow continuation: polyline end joins a polyline start
        return tail_rec[2] and not head_rec[2]

    by_span: dict[tuple[int, int], list[tuple[int, int, bool]]] = {}
    for rec in endpoints:
        span = trajectories[rec[1]].span
        by_span.setdefault((span.i, span.j), []).append(rec)

    # 2. endpoints across adjacent spans (each unordered span pair once)
    candidates = []
    for span_key in sorted(by_span):
        i, j = span_key
        for di, dj in ((0, 1), (1, -1), (1, 0), (1, 1)):
            other = (i + di, j + dj)
            if other not in by_span:
                continue
            for rec_a in by_span[span_key]:
                for rec_b in by_span[other]:
                    if rec_a[0] == rec_b[0]:
                        continue
                    if not (joinable(rec_a, rec_b) or joinable(rec_b, rec_a)):
                        continue
                    d = math.hypot(*(positions[rec_a[0]] - positions[rec_b[0]]))
                    if d <= gamma:
                        candidates.append((d, rec_a[0], rec_b[0]))
    _greedy_connect(candidates, free, add_edge)

    # 3. endpoints within one span (self-connection closes long open loops)
    traj_arc = [t.arc_length() for t in trajectories]
    candidates = []
    for span_key in sorted(by_span):
        group = by_span[span_key]
        for a in range(len(group)):
            rec_a = group[a]
            for b in range(a + 1, len(group)):
                rec_b = group[b]
                if rec_a[0] == rec_b[0]:
                    continue
                if not (joinable(rec_a, rec_b) or joinable(rec_b, rec_a)):
                    continue
                if (rec_a[1] == rec_b[1]
                        and traj_arc[rec_a[1]] <= 2.0 * gamma):
                    continue
                d = math.hypot(*(positions[rec_a[0]] - positions[rec_b[0]]))
                if d < gamma:
                    candidates.append((d, rec_a[0], rec_b[0]))
    _greedy_connect(candidates, free, add_edge)

    values = field.value(positions)
    edge_arr = (np.array(sorted(edges), dtype=np.int64)
                if edges else np.empty((0, 2), dtype=np.int64))
    return TopoGraph(positions, values, kinds, edge_arr)


def _greedy_connect(candidates, free: dict[int, int], add_edge) -> None:
    for d, a, b in sorted(candidates, key=lambda c: (c[0], c[1], c[2])):
        if free.get(a, 0) > 0 and free.get(b, 0) > 0:
            add_edge(a, b)
            free[a] -= 1
            free[b] -= 1


def warn_if_capped(trajectories: list[Trajectory]) -> None:
    capped = sum(1 for t in trajectories if t.warning)
    if capped:
        warnings.warn(f"{capped} trajectories hit the step cap", stacklevel=2)
