"""Exact squared Euclidean distance transform with periodic axes.

Separable lower-envelope-of-parabolas passes, one axis at a time. A periodic
axis is handled by running the 1-D pass on the axis doubled and folding the
two copies with ``min``; a non-periodic axis is padded with a source cell on
both ends, so the region outside the grid counts as complement.
"""

from __future__ import annotations

import numba
import numpy as np

INF = np.inf


@numba.njit(cache=True)
def _envelope_1d(f, out, w):
    # lower envelope of parabolas w (q - p)^2 + f[p] over finite f[p]
    n = f.shape[0]
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1, dtype=np.float64)
    k = -1
    for q in range(n):
        if f[q] == INF:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -INF
            z[1] = INF
            continue
        while True:
            p = v[k]
            s = ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p))
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = s if k > 0 else -INF
        z[k + 1] = INF
    if k < 0:
        for q in range(n):
            out[q] = INF
        return
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        p = v[j]
        out[q] = w * (q - p) * (q - p) + f[p]


@numba.njit(cache=True)
def _pass_lines(lines, periodic, w):
    m, n = lines.shape
    out = np.empty_like(lines)
    if periodic:
        buf = np.empty(2 * n)
        res = np.empty(2 * n)
        for i in range(m):
            for q in range(n):
                buf[q] = lines[i, q]
                buf[q + n] = lines[i, q]
            _envelope_1d(buf, res, w)
            for q in range(n):
                a = res[q]
                b = res[q + n]
                out[i, q] = a if a < b else b
    else:
        buf = np.empty(n + 2)
        res = np.empty(n + 2)
        for i in range(m):
            buf[0] = 0.0
            buf[n + 1] = 0.0
            for q in range(n):
                buf[q + 1] = lines[i, q]
            _envelope_1d(buf, res, w)
            for q in range(n):
                out[i, q] = res[q + 1]
    return out


def distance_transform(mask, periodic, spacing=None) -> np.ndarray:
    """Squared distance from every cell centre to the nearest cell outside ``mask``.

    Cells outside the mask get 0. Units are grid steps unless ``spacing`` is given.
    Entries stay ``inf`` when no complement cell is reachable (full mask on a torus).
    """
    mask = np.asarray(mask, dtype=bool)
    if np.isscalar(periodic):
        periodic = (bool(periodic),) * mask.ndim
    if spacing is None:
        spacing = (1.0,) * mask.ndim
    d = np.where(mask, INF, 0.0)
    for axis in range(mask.ndim):
        moved = np.moveaxis(d, axis, -1)
        shape = moved.shape
        lines = np.ascontiguousarray(moved).reshape(-1, shape[-1])
        res = _pass_lines(lines, bool(periodic[axis]), float(spacing[axis]) ** 2)
        d = np.moveaxis(res.reshape(shape), -1, axis)
    return np.ascontiguousarray(d)
