"""Low-level numerical kernels.

Scalar loops compiled with numba when it is importable; the identical code
runs interpreted as a fallback so results never depend on the compiler.
Kernels release the GIL (``nogil=True``) so span-level work items can
overlap under a thread pool.

Conventions used throughout:

* models are clamped uniform-knot tensor-product B-splines on the parameter
  square [0,1]^2, mapped affinely from the physical domain;
* ``order`` means total derivative order; partial derivatives are packed as
  [f, f1, f2, f11, f12, f22, f111, f112, f122, f222] (physical coordinates);
* field evaluations write [v, v1, v2, v11, v12, v22] and fill 1/3/6 slots
  for order 0/1/2;
* parameter coordinates are clamped to [0,1] here — strict domain checks
  belong to the public API, while tracing needs lenient evaluation for
  Runge-Kutta stage points that stray marginally outside.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is installed in practice
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# Field type codes (see fields.py).
FIELD_PLAIN = 0
FIELD_GRAD_CROSS = 1  # h = f1*g2 - f2*g1 for two models sharing knots
FIELD_RIDGE = 2       # same determinant with g = |grad f|^2

# Trace stop codes.
STOP_INTERIOR = 0      # correction failure / loop closure bookkeeping
STOP_BOUNDARY = 1      # left the span (or the domain)
STOP_NEAR_CRITICAL = 2
STOP_CAP = 3           # step cap reached


@njit(cache=True, nogil=True)
def span_index(nspans, t):
    """Span containing parameter t in [0,1].

    Exact interior breakpoints resolve to the lower span; t=1 maps to the
    last span.
    """
    x = t * nspans
    i = int(math.floor(x))
    if i >= nspans:
        i = nspans - 1
    elif i > 0 and x == float(i):
        i -= 1
    if i < 0:
        i = 0
    return i


@njit(cache=True, nogil=True)
def basis_derivatives(knots, p, k, u, nd, ders):
    """Nonzero basis functions and derivatives at u in knot span k.

    Writes rows 0..nd of ``ders`` (shape (>=nd+1, p+1)); column j refers to
    control index k-p+j. Standard triangular-table algorithm; knot span k
    must satisfy knots[k] <= u <= knots[k+1] with positive width.
    """
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - knots[k + 1 - j]
        right[j] = knots[k + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    for j in range(p + 1):
        ders[0, j] = ndu[j, p]
    if nd == 0:
        return
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1 = 0
        s2 = 1
        a[0, 0] = 1.0
        for kk in range(1, nd + 1):
            d = 0.0
            rk = r - kk
            pk = p - kk
            if r >= kk:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = kk - 1 if (r - 1) <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, kk] = -a[s1, kk - 1] / ndu[pk + 1, r]
                d += a[s2, kk] * ndu[r, pk]
            ders[kk, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for kk in range(1, nd + 1):
        for j in range(p + 1):
            ders[kk, j] *= fac
        fac *= float(p - kk)


@njit(cache=True, nogil=True)
def model_partials(p, knots_u, knots_v, nsu, nsv, ctrl,
                   x1min, inv_len1, x2min, inv_len2,
                   x1, x2, order, out):
    """All physical partial derivatives of one model up to total ``order``.

    ``out`` must hold 10 slots; slots beyond the requested order are left
    untouched. ``order`` must be <= 3.
    """
    u = (x1 - x1min) * inv_len1
    v = (x2 - x2min) * inv_len2
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    if v < 0.0:
        v = 0.0
    elif v > 1.0:
        v = 1.0
    su = span_index(nsu, u)
    sv = span_index(nsv, v)
    nd_u = order if order < p else p
    nd_v = order if order < p else p
    du = np.zeros((4, p + 1))
    dv = np.zeros((4, p + 1))
    basis_derivatives(knots_u, p, su + p, u, nd_u, du)
    basis_derivatives(knots_v, p, sv + p, v, nd_v, dv)
    # contract over the u direction first
    tmp = np.zeros((order + 1, p + 1))
    for d in range(order + 1):
        for b in range(p + 1):
            acc = 0.0
            for a_ in range(p + 1):
                acc += du[d, a_] * ctrl[su + a_, sv + b]
            tmp[d, b] = acc
    pw1 = np.empty(order + 1)
    pw2 = np.empty(order + 1)
    pw1[0] = 1.0
    pw2[0] = 1.0
    for d in range(1, order + 1):
        pw1[d] = pw1[d - 1] * inv_len1
        pw2[d] = pw2[d - 1] * inv_len2
    idx = 0
    for tot in range(order + 1):
        for d2 in range(tot + 1):
            d1 = tot - d2
            acc = 0.0
            for b in range(p + 1):
                acc += tmp[d1, b] * dv[d2, b]
            out[idx] = acc * pw1[d1] * pw2[d2]
            idx += 1


@njit(cache=True, nogil=True)
def field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
               x1min, il1, x2min, il2, x1, x2, order, out):
    """Value/gradient/Hessian of a (possibly derived) scalar field.

    ``out`` holds 6 slots [v, v1, v2, v11, v12, v22]; 1/3/6 slots are filled
    for order 0/1/2. The ridge field supports order <= 1 only (its second
    derivatives would require fourth derivatives of the base model).
    """
    if ftype == FIELD_PLAIN:
        buf = np.zeros(10)
        model_partials(p, ku, kv, nsu, nsv, cf, x1min, il1, x2min, il2,
                       x1, x2, order, buf)
        out[0] = buf[0]
        if order >= 1:
            out[1] = buf[1]
            out[2] = buf[2]
        if order >= 2:
            out[3] = buf[3]
            out[4] = buf[4]
            out[5] = buf[5]
    elif ftype == FIELD_GRAD_CROSS:
        mo = order + 1
        F = np.zeros(10)
        G = np.zeros(10)
        model_partials(p, ku, kv, nsu, nsv, cf, x1min, il1, x2min, il2,
                       x1, x2, mo, F)
        model_partials(p, ku, kv, nsu, nsv, cg, x1min, il1, x2min, il2,
                       x1, x2, mo, G)
        out[0] = F[1] * G[2] - F[2] * G[1]
        if order >= 1:
            out[1] = F[3] * G[2] + F[1] * G[4] - F[4] * G[1] - F[2] * G[3]
            out[2] = F[1] * G[5] + F[4] * G[2] - F[2] * G[4] - F[5] * G[1]
        if order >= 2:
            out[3] = (F[6] * G[2] + 2.0 * F[3] * G[4] + F[1] * G[7]
                      - F[7] * G[1] - 2.0 * F[4] * G[3] - F[2] * G[6])
            out[4] = (F[7] * G[2] + F[3] * G[5] + F[1] * G[8]
                      - F[8] * G[1] - F[5] * G[3] - F[2] * G[7])
            out[5] = (2.0 * F[4] * G[5] + F[1] * G[9] + F[8] * G[2]
                      - 2.0 * F[5] * G[4] - F[2] * G[8] - F[9] * G[1])
    else:
        F = np.zeros(10)
        mo = 2 if order == 0 else 3
        model_partials(p, ku, kv, nsu, nsv, cf, x1min, il1, x2min, il2,
                       x1, x2, mo, F)
        f1 = F[1]
        f2 = F[2]
        f11 = F[3]
        f12 = F[4]
        f22 = F[5]
        out[0] = 2.0 * ((f1 * f1 - f2 * f2) * f12 + f1 * f2 * (f22 - f11))
        if order >= 1:
            g1 = 2.0 * (f11 * f1 + f12 * f2)
            g2 = 2.0 * (f12 * f1 + f22 * f2)
            g11 = 2.0 * (f11 * f11 + F[6] * f1 + F[7] * f2 + f12 * f12)
            g12 = 2.0 * (F[7] * f1 + f11 * f12 + F[8] * f2 + f12 * f22)
            g22 = 2.0 * (F[8] * f1 + f12 * f12 + f22 * f22 + F[9] * f2)
            out[1] = f11 * g2 + f1 * g12 - f12 * g1 - f2 * g11
            out[2] = f1 * g22 + g2 * f12 - f2 * g12 - g1 * f22
        if order >= 2:
            out[3] = 0.0
            out[4] = 0.0
            out[5] = 0.0


@njit(cache=True, nogil=True)
def model_partials_batch(p, ku, kv, nsu, nsv, ctrl,
                         x1min, il1, x2min, il2, pts, order, out):
    for i in range(pts.shape[0]):
        model_partials(p, ku, kv, nsu, nsv, ctrl, x1min, il1, x2min, il2,
                       pts[i, 0], pts[i, 1], order, out[i])


@njit(cache=True, nogil=True)
def field_eval_batch(ftype, p, ku, kv, nsu, nsv, cf, cg,
                     x1min, il1, x2min, il2, pts, order, out):
    for i in range(pts.shape[0]):
        field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
                   x1min, il1, x2min, il2, pts[i, 0], pts[i, 1], order,
                   out[i])


@njit(cache=True, nogil=True)
def descent_batch(ftype, p, ku, kv, nsu, nsv, cf, cg,
                  x1min, il1, x2min, il2,
                  seeds, a, eps, max_iters, min_grad,
                  lo1, hi1, lo2, hi2, out_pts, out_ok):
    """Normalized gradient descent toward field == a for a batch of seeds.

    Iterates are confined to the span: an iterate that leaves is clamped
    back, and a seed is abandoned after two consecutive exits. out_ok[i]
    marks convergence (|field - a| <= eps).
    """
    buf = np.zeros(6)
    for i in range(seeds.shape[0]):
        x1 = seeds[i, 0]
        x2 = seeds[i, 1]
        ok = False
        exits = 0
        for _ in range(max_iters):
            field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
                       x1min, il1, x2min, il2, x1, x2, 1, buf)
            fa = buf[0] - a
            if abs(fa) <= eps:
                ok = True
                break
            g1 = buf[1]
            g2 = buf[2]
            gg = g1 * g1 + g2 * g2
            if gg <= min_grad * min_grad:
                break
            t = fa / gg
            n1 = x1 - t * g1
            n2 = x2 - t * g2
            if n1 < lo1 or n1 > hi1 or n2 < lo2 or n2 > hi2:
                exits += 1
                if exits >= 2:
                    break
                if n1 < lo1:
                    n1 = lo1
                elif n1 > hi1:
                    n1 = hi1
                if n2 < lo2:
                    n2 = lo2
                elif n2 > hi2:
                    n2 = hi2
            else:
                exits = 0
            x1 = n1
            x2 = n2
        out_pts[i, 0] = x1
        out_pts[i, 1] = x2
        out_ok[i] = ok


@njit(cache=True, nogil=True)
def correct_point(ftype, p, ku, kv, nsu, nsv, cf, cg,
                  x1min, il1, x2min, il2,
                  x1, x2, a, eps, max_iters, min_grad):
    """Pull a point back onto the isocontour; returns (ok, x1, x2)."""
    buf = np.zeros(6)
    for _ in range(max_iters):
        field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
                   x1min, il1, x2min, il2, x1, x2, 1, buf)
        fa = buf[0] - a
        if abs(fa) <= eps:
            return True, x1, x2
        g1 = buf[1]
        g2 = buf[2]
        gg = g1 * g1 + g2 * g2
        if gg <= min_grad * min_grad:
            return False, x1, x2
        t = fa / gg
        x1 -= t * g1
        x2 -= t * g2
    field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
               x1min, il1, x2min, il2, x1, x2, 0, buf)
    return abs(buf[0] - a) <= eps, x1, x2


@njit(cache=True, nogil=True)
def tangent_at(ftype, p, ku, kv, nsu, nsv, cf, cg,
               x1min, il1, x2min, il2, x1, x2, direction, min_grad):
    """Unit contour tangent (perpendicular to the gradient)."""
    buf = np.zeros(6)
    field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
               x1min, il1, x2min, il2, x1, x2, 1, buf)
    g1 = buf[1]
    g2 = buf[2]
    gn = math.sqrt(g1 * g1 + g2 * g2)
    if gn <= min_grad:
        return False, 0.0, 0.0
    return True, -direction * g2 / gn, direction * g1 / gn


@njit(cache=True, nogil=True)
def rk4_step_kernel(ftype, p, ku, kv, nsu, nsv, cf, cg,
                    x1min, il1, x2min, il2,
                    x1, x2, step, direction, min_grad):
    """One fourth-order Runge-Kutta step along the contour tangent."""
    ok, k11, k12 = tangent_at(ftype, p, ku, kv, nsu, nsv, cf, cg,
                              x1min, il1, x2min, il2, x1, x2, direction,
                              min_grad)
    if not ok:
        return False, x1, x2
    ok, k21, k22 = tangent_at(ftype, p, ku, kv, nsu, nsv, cf, cg,
                              x1min, il1, x2min, il2,
                              x1 + 0.5 * step * k11, x2 + 0.5 * step * k12,
                              direction, min_grad)
    if not ok:
        return False, x1, x2
    ok, k31, k32 = tangent_at(ftype, p, ku, kv, nsu, nsv, cf, cg,
                              x1min, il1, x2min, il2,
                              x1 + 0.5 * step * k21, x2 + 0.5 * step * k22,
                              direction, min_grad)
    if not ok:
        return False, x1, x2
    ok, k41, k42 = tangent_at(ftype, p, ku, kv, nsu, nsv, cf, cg,
                              x1min, il1, x2min, il2,
                              x1 + step * k31, x2 + step * k32,
                              direction, min_grad)
    if not ok:
        return False, x1, x2
    n1 = x1 + step / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    n2 = x2 + step / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
    return True, n1, n2


@njit(cache=True, nogil=True)
def trace_path(ftype, p, ku, kv, nsu, nsv, cf, cg,
               x1min, il1, x2min, il2,
               sx1, sx2, a, step, direction, eps, max_corr, min_grad,
               lo1, hi1, lo2, hi2,
               check_closure, max_steps, out):
    """Trace one direction of a trajectory from (sx1, sx2).

    Every accepted point is corrected back onto the contour. Stops on loop
    closure (within ``step`` of the start after >= 3 points), span exit
    (one extra half step is taken and kept if it stays within the span,
    bounding the cross-span gap by one step), near-critical behaviour
    (flat gradient or displacement < step/2), or the step cap. Returns
    (count, stop_code, closed).
    """
    n = 0
    x1 = sx1
    x2 = sx2
    closed = False
    stop = STOP_CAP
    for _ in range(max_steps):
        ok, n1, n2 = rk4_step_kernel(ftype, p, ku, kv, nsu, nsv, cf, cg,
                                     x1min, il1, x2min, il2,
                                     x1, x2, step, direction, min_grad)
        if not ok:
            stop = STOP_NEAR_CRITICAL
            break
        if n1 < lo1 or n1 > hi1 or n2 < lo2 or n2 > hi2:
            ok, h1, h2 = rk4_step_kernel(ftype, p, ku, kv, nsu, nsv, cf, cg,
                                         x1min, il1, x2min, il2,
                                         x1, x2, 0.5 * step, direction,
                                         min_grad)
            stop = STOP_BOUNDARY
            if not ok:
                stop = STOP_NEAR_CRITICAL
                break
            okc, h1, h2 = correct_point(ftype, p, ku, kv, nsu, nsv, cf, cg,
                                        x1min, il1, x2min, il2,
                                        h1, h2, a, eps, max_corr, min_grad)
            if not okc:
                stop = STOP_INTERIOR
                break
            if h1 < lo1 or h1 > hi1 or h2 < lo2 or h2 > hi2:
                break  # half step exits too: the last kept point is close
            out[n, 0] = h1
            out[n, 1] = h2
            n += 1
            break
        okc, n1, n2 = correct_point(ftype, p, ku, kv, nsu, nsv, cf, cg,
                                    x1min, il1, x2min, il2,
                                    n1, n2, a, eps, max_corr, min_grad)
        if not okc:
            stop = STOP_INTERIOR
            break
        if check_closure and n >= 3:
            dx = n1 - sx1
            dy = n2 - sx2
            if math.sqrt(dx * dx + dy * dy) < step:
                closed = True
                stop = STOP_INTERIOR
                break
        ddx = n1 - x1
        ddy = n2 - x2
        disp = math.sqrt(ddx * ddx + ddy * ddy)
        out[n, 0] = n1
        out[n, 1] = n2
        n += 1
        x1 = n1
        x2 = n2
        if disp < 0.5 * step:
            stop = STOP_NEAR_CRITICAL
            break
    return n, stop, closed


@njit(cache=True, nogil=True)
def newton_batch(ftype, p, ku, kv, nsu, nsv, cf, cg,
                 x1min, il1, x2min, il2,
                 seeds, grad_tol, max_iters, degen_tol,
                 lo1, hi1, lo2, hi2, out_pts, out_kind):
    """Newton iteration toward a critical point for a batch of seeds.

    out_kind[i]: -1 failed (divergence, singular Hessian, or left span),
    1 minimum, 2 maximum, 3 saddle, 4 degenerate.
    """
    buf = np.zeros(6)
    for i in range(seeds.shape[0]):
        x1 = seeds[i, 0]
        x2 = seeds[i, 1]
        kind = -1
        for _ in range(max_iters):
            field_eval(ftype, p, ku, kv, nsu, nsv, cf, cg,
                       x1min, il1, x2min, il2, x1, x2, 2, buf)
            g1 = buf[1]
            g2 = buf[2]
            h11 = buf[3]
            h12 = buf[4]
            h22 = buf[5]
            if math.sqrt(g1 * g1 + g2 * g2) < grad_tol:
                det = h11 * h22 - h12 * h12
                if abs(det) <= degen_tol:
                    kind = 4
                elif det < 0.0:
                    kind = 3
                elif h11 + h22 > 0.0:
                    kind = 1
                else:
                    kind = 2
                break
            det = h11 * h22 - h12 * h12
            scale = abs(h11 * h22) + h12 * h12
            if det == 0.0 or abs(det) <= 1e-14 * scale:
                break
            x1 -= (h22 * g1 - h12 * g2) / det
            x2 -= (-h12 * g1 + h11 * g2) / det
            if x1 < lo1 or x1 > hi1 or x2 < lo2 or x2 > hi2:
                break
        out_pts[i, 0] = x1
        out_pts[i, 1] = x2
        out_kind[i] = kind
