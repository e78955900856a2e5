"""Independent reference implementations used only to check the package.

Everything here deliberately avoids the production code paths: basis
functions come from the textbook recursion, derivatives from finite
differences, critical points from dense grid scans refined by scipy, and
contour topology from high-resolution marching squares.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize


def naive_basis(knots, p, j, u):
    """Cox-de Boor recursion for N_{j,p}(u), with 0/0 treated as 0."""
    knots = np.asarray(knots, dtype=float)
    if p == 0:
        if knots[j] <= u < knots[j + 1]:
            return 1.0
        # close the last nonempty interval at u == 1
        if u == knots[-1] and knots[j] < knots[j + 1] == knots[-1]:
            return 1.0
        return 0.0
    left = 0.0
    den = knots[j + p] - knots[j]
    if den > 0.0:
        left = (u - knots[j]) / den * naive_basis(knots, p - 1, j, u)
    right = 0.0
    den = knots[j + p + 1] - knots[j + 1]
    if den > 0.0:
        right = (knots[j + p + 1] - u) / den * naive_basis(knots, p - 1, j + 1, u)
    return left + right


def naive_basis_derivative(knots, p, j, u, order):
    """Derivative of N_{j,p} via the classical recurrence."""
    if order == 0:
        return naive_basis(knots, p, j, u)
    knots = np.asarray(knots, dtype=float)
    left = 0.0
    den = knots[j + p] - knots[j]
    if den > 0.0:
        left = p / den * naive_basis_derivative(knots, p - 1, j, u, order - 1)
    right = 0.0
    den = knots[j + p + 1] - knots[j + 1]
    if den > 0.0:
        right = p / den * naive_basis_derivative(knots, p - 1, j + 1, u, order - 1)
    return left - right


def central_diff(fn, x, dim, step):
    """Central finite difference of a scalar function of a 2-point."""
    lo = np.array(x, dtype=float)
    hi = np.array(x, dtype=float)
    lo[dim] -= step
    hi[dim] += step
    return (fn(hi) - fn(lo)) / (2.0 * step)


def dense_scan_criticals(value_fn, grad_fn, domain, resolution=1000,
                         refine_tol=1e-12):
    """Critical points found by a dense grid scan plus scipy refinement.

    Scans the squared gradient magnitude on a ``resolution``^2 lattice,
    collects strict local minima of it in the interior, and polishes each
    candidate with a derivative-free minimizer. Returns an (n, 2) array of
    deduplicated critical points where the polished gradient is tiny.
    """
    x1_min, x1_max, x2_min, x2_max = domain
    xs = np.linspace(x1_min, x1_max, resolution)
    ys = np.linspace(x2_min, x2_max, resolution)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    g = grad_fn(pts)
    gg = (g ** 2).sum(axis=1).reshape(resolution, resolution)
    inner = gg[1:-1, 1:-1]
    neighbors = np.stack([
        gg[:-2, 1:-1], gg[2:, 1:-1], gg[1:-1, :-2], gg[1:-1, 2:],
        gg[:-2, :-2], gg[:-2, 2:], gg[2:, :-2], gg[2:, 2:],
    ])
    is_min = np.all(inner <= neighbors, axis=0)
    cand_i, cand_j = np.nonzero(is_min)
    scale = max(x1_max - x1_min, x2_max - x2_min)
    grad_scale = np.sqrt(np.median(gg)) + 1e-30

    def objective(x):
        gv = grad_fn(np.asarray(x, dtype=float).reshape(1, 2))[0]
        return float(gv @ gv)

    found = []
    for ci, cj in zip(cand_i, cand_j):
        x0 = np.array([xs[ci + 1], ys[cj + 1]])
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"xatol": refine_tol * scale,
                                         "fatol": 0.0, "maxiter": 400})
        gnorm = np.sqrt(res.fun)
        if gnorm > 1e-7 * grad_scale:
            continue
        x = res.x
        if not (x1_min <= x[0] <= x1_max and x2_min <= x[1] <= x2_max):
            continue
        found.append(x)
    if not found:
        return np.empty((0, 2))
    found = np.asarray(found)
    order = np.lexsort((found[:, 1], found[:, 0]))
    found = found[order]
    kept = []
    tol = 1e-5 * scale
    for x in found:
        if all(np.hypot(*(x - k)) > tol for k in kept):
            kept.append(x)
    return np.asarray(kept)


def marching_squares_topology(values, isovalue):
    """(n_loops, n_components) of the PL contour of a sampled field.

    Independent of the package's marching-squares module: builds crossing
    segments cell by cell and counts topology with a local union-find.
    """
    vals = np.asarray(values, dtype=float)
    if np.any(vals == isovalue):
        span = vals.max() - vals.min()
        vals = np.where(vals == isovalue, vals + 1e-12 * (span or 1.0), vals)
    above = vals > isovalue
    nx, ny = vals.shape

    def edge_key(i, j, horizontal):
        return (i, j, horizontal)

    parent = {}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            return True
        return False

    n_edges = 0
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            sides = [edge_key(i, j, True), edge_key(i + 1, j, False),
                     edge_key(i, j + 1, True), edge_key(i, j, False)]
            crossings = []
            for c, (a, b) in enumerate(zip(corners, corners[1:] + corners[:1])):
                if above[a] != above[b]:
                    crossings.append(sides[c])
            if not crossings:
                continue
            for k in crossings:
                if k not in parent:
                    parent[k] = k
            if len(crossings) == 2:
                pairs = [(crossings[0], crossings[1])]
            else:
                # corners alternate above/below; the center decides which
                # opposite corners the contour separates
                center = np.mean([vals[c] for c in corners])
                if (center > isovalue) == above[corners[0]]:
                    pairs = [(sides[0], sides[1]), (sides[2], sides[3])]
                else:
                    pairs = [(sides[0], sides[3]), (sides[1], sides[2])]
            for a, b in pairs:
                n_edges += 1
                union(a, b)
    if not parent:
        return 0, 0
    roots = {find(k) for k in parent}
    n_cc = len(roots)
    n_vertices = len(parent)
    return n_edges - n_vertices + n_cc, n_cc
