"""Exact Euclidean distance transform with nearest-site labels.

Two separable passes: a 1D scan down each column, then a lower envelope of
parabolas along each row (Felzenszwalb & Huttenlocher). Squared distances are
kept as integers throughout so equal distances compare equal, and every
pixel's label is the nearest site with the smallest ``(y, x)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .raster import as_binary

NO_SITE = -1


@njit(cache=True)
def _column_pass(sites, col_d2, col_y):
    height, width = sites.shape
    big = np.int64(1) << 60
    for x in range(width):
        last = -1
        for y in range(height):
            if sites[y, x]:
                last = y
            if last >= 0:
                col_y[y, x] = last
                col_d2[y, x] = (y - last) * (y - last)
            else:
                col_y[y, x] = -1
                col_d2[y, x] = big
        nxt = -1
        for y in range(height - 1, -1, -1):
            if sites[y, x]:
                nxt = y
            if nxt >= 0:
                d2 = (nxt - y) * (nxt - y)
                # strict: an equally distant site above keeps priority (smaller y)
                if d2 < col_d2[y, x]:
                    col_d2[y, x] = d2
                    col_y[y, x] = nxt


@njit(cache=True)
def _row_pass(col_d2, col_y, dist2, lab_x, lab_y):
    height, width = col_d2.shape
    big = np.int64(1) << 60
    env = np.empty(width, dtype=np.int64)
    z = np.empty(width + 1, dtype=np.float64)
    for y in range(height):
        g = col_d2[y]
        k = -1
        s = 0.0
        for q in range(width):
            if g[q] >= big:
                continue
            fq = g[q] + q * q
            while k >= 0:
                v = env[k]
                s = (fq - (g[v] + v * v)) / (2.0 * (q - v))
                # keep parabolas that merely touch the envelope: they tie there
                if s < z[k]:
                    k -= 1
                else:
                    break
            if k < 0:
                k = 0
                env[0] = q
                z[0] = -np.inf
            else:
                k += 1
                env[k] = q
                z[k] = s
            z[k + 1] = np.inf
        m = k + 1
        if m == 0:
            for x in range(width):
                dist2[y, x] = big
                lab_x[y, x] = -1
                lab_y[y, x] = -1
            continue
        kk = 0
        for x in range(width):
            while kk + 1 < m and z[kk + 1] <= x:
                kk += 1
            q = env[kk]
            best = (x - q) * (x - q) + g[q]
            bq = q
            by = col_y[y, q]
            j = kk - 1
            while j >= 0:
                qj = env[j]
                vj = (x - qj) * (x - qj) + g[qj]
                if vj != best:
                    break
                yj = col_y[y, qj]
                if yj < by or (yj == by and qj < bq):
                    bq = qj
                    by = yj
                j -= 1
            j = kk + 1
            while j < m:
                qj = env[j]
                vj = (x - qj) * (x - qj) + g[qj]
                if vj != best:
                    break
                yj = col_y[y, qj]
                if yj < by or (yj == by and qj < bq):
                    bq = qj
                    by = yj
                j += 1
            dist2[y, x] = best
            lab_x[y, x] = bq
            lab_y[y, x] = by


def squared_edt_with_labels(sites) -> tuple[np.ndarray, np.ndarray]:
    """Integer squared distances and ``(x, y)`` labels of the nearest site.

    Returns ``(dist2, labels)`` where ``dist2`` is ``int64`` of shape
    ``(h, w)`` and ``labels`` is ``int64`` of shape ``(h, w, 2)``.
    """
    sites = np.ascontiguousarray(as_binary(sites))
    if not sites.any():
        raise ValueError("no sites")
    height, width = sites.shape
    col_d2 = np.empty((height, width), dtype=np.int64)
    col_y = np.empty((height, width), dtype=np.int64)
    _column_pass(sites, col_d2, col_y)
    dist2 = np.empty((height, width), dtype=np.int64)
    lab_x = np.empty((height, width), dtype=np.int64)
    lab_y = np.empty((height, width), dtype=np.int64)
    _row_pass(col_d2, col_y, dist2, lab_x, lab_y)
    return dist2, np.stack([lab_x, lab_y], axis=-1)


def euclidean_dt_with_labels(sites) -> tuple[np.ndarray, np.ndarray]:
    """Exact Euclidean distance to the nearest true pixel of ``sites``.

    Parameters
    ----------
    sites : array_like of bool, shape (h, w)
        Site map; must contain at least one true pixel.

    Returns
    -------
    dist : ndarray of float64, shape (h, w)
    nearest : ndarray of int64, shape (h, w, 2)
        ``nearest[y, x] == (sx, sy)``, the site attaining ``dist[y, x]``.
        Among equidistant sites the one with the smallest ``sy`` wins, then
        the smallest ``sx``.

    Raises
    ------
    ValueError
        If ``sites`` has no true pixel.
    """
    dist2, labels = squared_edt_with_labels(sites)
    return np.sqrt(dist2.astype(np.float64)), labels


def euclidean_dt(sites) -> np.ndarray:
    """Distance map only; ``inf`` everywhere when ``sites`` is empty."""
    sites = as_binary(sites)
    if not sites.any():
        return np.full(sites.shape, np.inf)
    return euclidean_dt_with_labels(sites)[0]
