"""Compiled inner loops for map training.

The public step functions in ``som`` and ``growgrid`` are the readable
reference; these kernels run the same arithmetic over many presentations.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _nearest(w, x):
    best, arg = np.inf, 0
    n, d = w.shape
    for i in range(n):
        s = 0.0
        for k in range(d):
            diff = x[k] - w[i, k]
            s += diff * diff
        if s < best:
            best, arg = s, i
    return arg


@njit(cache=True)
def som_epochs(w, x, order, alphas, radii, dist):
    """Gaussian-neighborhood updates; ``dist`` already holds d or d**2."""
    n, d = w.shape
    for t in range(order.shape[0]):
        xk = x[order[t]]
        win = _nearest(w, xk)
        denom = 2.0 * radii[t] ** 2
        for i in range(n):
            g = alphas[t] * np.exp(-dist[win, i] / denom)
            for k in range(d):
                w[i, k] += g * (xk[k] - w[i, k])


@njit(cache=True)
def _direct(w, rows, cols, win, xk, alpha):
    r, c = win // cols, win % cols
    d = w.shape[1]
    for dr, dc in ((0, 0), (-1, 0), (0, -1), (0, 1), (1, 0)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            i = rr * cols + cc
            for k in range(d):
                w[i, k] += alpha * (xk[k] - w[i, k])


@njit(cache=True)
def growth_steps(w, rows, cols, counters, x, order, start, alpha, budget):
    """Present ``x[order[start:]]`` until ``budget`` steps or the order runs out.

    Returns the number of presentations performed.
    """
    done = 0
    t = start
    while t < order.shape[0] and done < budget:
        xk = x[order[t]]
        win = _nearest(w, xk)
        counters[win] += 1
        _direct(w, rows, cols, win, xk, alpha)
        t += 1
        done += 1
    return done


@njit(cache=True)
def finetune_direct(w, rows, cols, x, order, alphas):
    for t in range(order.shape[0]):
        xk = x[order[t]]
        win = _nearest(w, xk)
        _direct(w, rows, cols, win, xk, alphas[t])


@njit(cache=True)
def nearest_many(w, x):
    out = np.empty(x.shape[0], dtype=np.int64)
    for r in range(x.shape[0]):
        out[r] = _nearest(w, x[r])
    return out
