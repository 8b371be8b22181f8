# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; contracts mirror ``gazekit._pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, ceil, floor

cnp.import_array()


def nw_fill(a, b, S, double c_del, double c_ins, bint maximize):
    cdef const cnp.int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef const cnp.int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j
    out = np.empty((n + 1, m + 1), dtype=np.float64)
    cdef double[:, ::1] dp = out
    cdef double diag, up, left, best
    with nogil:
        dp[0, 0] = 0.0
        for i in range(1, n + 1):
            dp[i, 0] = i * c_del
        for j in range(1, m + 1):
            dp[0, j] = j * c_ins
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                diag = dp[i - 1, j - 1] + sv[av[i - 1], bv[j - 1]]
                up = dp[i - 1, j] + c_del
                left = dp[i, j - 1] + c_ins
                best = diag
                if maximize:
                    if up > best:
                        best = up
                    if left > best:
                        best = left
                else:
                    if up < best:
                        best = up
                    if left < best:
                        best = left
                dp[i, j] = best
    return out


def idt_windows(x, y, valid, t, double period_us, double dispersion, double min_duration_us):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const cnp.uint8_t[::1] vv = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef const cnp.int64_t[::1] tv = np.ascontiguousarray(t, dtype=np.int64)
    cdef Py_ssize_t n = tv.shape[0], i = 0, j = 0, k
    cdef cnp.int64_t[::1] bad = np.zeros(n + 1, dtype=np.int64)
    cdef double xmin, xmax, ymin, ymax, xk, yk, nxmin, nxmax, nymin, nymax
    out = []
    for k in range(n):
        bad[k + 1] = bad[k] + (0 if vv[k] else 1)
    while i < n:
        if j < i:
            j = i
        while j < n and <double>(tv[j] - tv[i]) + period_us < min_duration_us:
            j += 1
        if j >= n:
            break
        if bad[j + 1] - bad[i] > 0:
            i += 1
            continue
        xmin = xmax = xv[i]
        ymin = ymax = yv[i]
        for k in range(i + 1, j + 1):
            xk = xv[k]
            yk = yv[k]
            if xk < xmin:
                xmin = xk
            elif xk > xmax:
                xmax = xk
            if yk < ymin:
                ymin = yk
            elif yk > ymax:
                ymax = yk
        if (xmax - xmin) + (ymax - ymin) > dispersion:
            i += 1
            continue
        while j + 1 < n and vv[j + 1]:
            xk = xv[j + 1]
            yk = yv[j + 1]
            nxmin = xk if xk < xmin else xmin
            nxmax = xk if xk > xmax else xmax
            nymin = yk if yk < ymin else ymin
            nymax = yk if yk > ymax else ymax
            if (nxmax - nxmin) + (nymax - nymin) > dispersion:
                break
            xmin = nxmin
            xmax = nxmax
            ymin = nymin
            ymax = nymax
            j += 1
        out.append((i, j))
        i = j + 1
    return out


def gaussian_accumulate(out, xs, ys, ws, double sigma, double radius):
    cdef double[:, ::1] ov = out
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(ws, dtype=np.float64)
    cdef Py_ssize_t h = ov.shape[0], w = ov.shape[1], p, r, c
    cdef Py_ssize_t r0, r1, c0, c1
    cdef double inv = 1.0 / (2.0 * sigma * sigma), px, py, wt, dx, dy, d2, r2 = radius * radius
    with nogil:
        for p in range(xv.shape[0]):
            px = xv[p]
            py = yv[p]
            wt = wv[p]
            if radius >= 0:
                c0 = <Py_ssize_t>ceil(px - radius)
                c1 = <Py_ssize_t>floor(px + radius)
                r0 = <Py_ssize_t>ceil(py - radius)
                r1 = <Py_ssize_t>floor(py + radius)
                if c0 < 0:
                    c0 = 0
                if r0 < 0:
                    r0 = 0
                if c1 > w - 1:
                    c1 = w - 1
                if r1 > h - 1:
                    r1 = h - 1
            else:
                c0 = 0
                r0 = 0
                c1 = w - 1
                r1 = h - 1
            for r in range(r0, r1 + 1):
                dy = <double>r - py
                for c in range(c0, c1 + 1):
                    dx = <double>c - px
                    d2 = dy * dy + dx * dx
                    if radius >= 0 and d2 > r2:
                        continue
                    ov[r, c] += wt * exp(-d2 * inv)
    return out
