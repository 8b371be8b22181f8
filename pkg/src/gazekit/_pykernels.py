"""Pure-Python implementations of the hot loops.

Same contracts as the compiled ``_ckernels`` module; used when the
extension is not built or ``GAZEKIT_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np


def nw_fill(a, b, S, c_del, c_ins, maximize):
    """Fill the (len(a)+1) x (len(b)+1) Needleman-Wunsch table.

    Rows follow ``a``. ``c_del`` is charged for consuming a token of ``a``
    against a gap, ``c_ins`` for a token of ``b``. ``S`` is indexed by the
    integer token codes in ``a`` and ``b``.
    """
    n, m = len(a), len(b)
    S = np.asarray(S, dtype=float).tolist()
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    dp = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = i * c_del
    for j in range(1, m + 1):
        dp[0][j] = j * c_ins
    pick = max if maximize else min
    for i in range(1, n + 1):
        row, prev = dp[i], dp[i - 1]
        srow = S[a[i - 1]]
        for j in range(1, m + 1):
            row[j] = pick(prev[j - 1] + srow[b[j - 1]], prev[j] + c_del, row[j - 1] + c_ins)
    return np.array(dp, dtype=float).reshape(n + 1, m + 1)


def idt_windows(x, y, valid, t, period_us, dispersion, min_duration_us):
    """Dispersion-threshold fixation windows as inclusive (first, last) index pairs.

    A window starts at the fewest samples whose covered duration reaches
    ``min_duration_us``. If its dispersion ``(max x - min x) + (max y - min y)``
    is within ``dispersion`` it grows one sample at a time while it stays
    within; the grown window is emitted and the scan resumes after it.
    Otherwise the start slides by one sample. Windows holding an invalid
    sample never conform.
    """
    n = len(t)
    x = np.asarray(x, dtype=float).tolist()
    y = np.asarray(y, dtype=float).tolist()
    valid = np.asarray(valid, dtype=bool).tolist()
    t = np.asarray(t, dtype=np.int64).tolist()
    bad_prefix = [0] * (n + 1)
    for k in range(n):
        bad_prefix[k + 1] = bad_prefix[k] + (0 if valid[k] else 1)
    out = []
    i = 0
    j = 0
    while i < n:
        if j < i:
            j = i
        while j < n and t[j] - t[i] + period_us < min_duration_us:
            j += 1
        if j >= n:
            break
        if bad_prefix[j + 1] - bad_prefix[i] > 0:
            i += 1
            continue
        xmin = xmax = x[i]
        ymin = ymax = y[i]
        for k in range(i + 1, j + 1):
            xk, yk = x[k], y[k]
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
        while j + 1 < n and valid[j + 1]:
            xk, yk = x[j + 1], y[j + 1]
            nxmin, nxmax = min(xmin, xk), max(xmax, xk)
            nymin, nymax = min(ymin, yk), max(ymax, yk)
            if (nxmax - nxmin) + (nymax - nymin) > dispersion:
                break
            xmin, xmax, ymin, ymax = nxmin, nxmax, nymin, nymax
            j += 1
        out.append((i, j))
        i = j + 1
    return out


def gaussian_accumulate(out, xs, ys, ws, sigma, radius):
    """Add ``w * exp(-d^2 / (2 sigma^2))`` around each point into ``out`` in place.

    Pixel ``(r, c)`` sits at coordinate ``(x=c, y=r)``. Contributions are
    limited to pixels within ``radius`` of the point; a negative radius
    disables truncation.
    """
    h, w = out.shape
    inv = 1.0 / (2.0 * sigma * sigma)
    for px, py, wt in zip(xs, ys, ws):
        if radius >= 0:
            c0, c1 = max(0, math.ceil(px - radius)), min(w - 1, math.floor(px + radius))
            r0, r1 = max(0, math.ceil(py - radius)), min(h - 1, math.floor(py + radius))
            if c0 > c1 or r0 > r1:
                continue
        else:
            c0, c1, r0, r1 = 0, w - 1, 0, h - 1
        dx = np.arange(c0, c1 + 1, dtype=float) - px
        dy = np.arange(r0, r1 + 1, dtype=float) - py
        d2 = dy[:, None] * dy[:, None] + dx[None, :] * dx[None, :]
        contrib = wt * np.exp(-d2 * inv)
        if radius >= 0:
            contrib[d2 > radius * radius] = 0.0
        out[r0:r1 + 1, c0:c1 + 1] += contrib
    return out
