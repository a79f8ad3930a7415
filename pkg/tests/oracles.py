"""Scalar reference implementations used as test oracles.

Written with plain loops over Python floats and ``math`` so they share no
code path with the vectorized library.
"""

import math


def to_lists(w):
    """(rows, cols, dim) array -> nested lists of floats."""
    return [[[float(v) for v in cell] for cell in row] for row in w]


def net_input(w, x):
    return [[math.sqrt(sum((x[k] - cell[k]) ** 2 for k in range(len(x)))) for cell in row] for row in w]


def activity(w, x, sigma):
    return [[math.exp(-s / sigma) for s in row] for row in net_input(w, x)]


def winner(act):
    best, arg = -math.inf, None
    for i, row in enumerate(act):
        for j, v in enumerate(row):
            if v > best:
                best, arg = v, (i, j)
    return arg


def som_step(w, x, alpha, sigma_r, sigma=1.0, squared=False):
    wi, wj = winner(activity(w, x, sigma))
    out = []
    for i, row in enumerate(w):
        new_row = []
        for j, cell in enumerate(row):
            d = math.sqrt((i - wi) ** 2 + (j - wj) ** 2)
            if squared:
                d = d * d
            g = math.exp(-d / (2.0 * sigma_r * sigma_r))
            new_row.append([cell[k] + alpha * g * (x[k] - cell[k]) for k in range(len(x))])
        out.append(new_row)
    return out


def decay(start, end, t, total):
    if total <= 1:
        return start
    return start * (end / start) ** (t / (total - 1))


def neighbors4(rows, cols, i, j):
    out = []
    for a, b in ((i - 1, j), (i, j - 1), (i, j + 1), (i + 1, j)):
        if 0 <= a < rows and 0 <= b < cols:
            out.append((a, b))
    return out


def gg_step(w, counters, x, alpha, sigma=1.0):
    rows, cols = len(w), len(w[0])
    wi, wj = winner(activity(w, x, sigma))
    counters = [list(r) for r in counters]
    counters[wi][wj] += 1
    moved = {(wi, wj)} | set(neighbors4(rows, cols, wi, wj))
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            cell = w[i][j]
            if (i, j) in moved:
                row.append([cell[k] + alpha * (x[k] - cell[k]) for k in range(len(x))])
            else:
                row.append(list(cell))
        out.append(row)
    return out, counters


def insertion_pair(w, counters):
    rows, cols = len(w), len(w[0])
    best, c1 = -1, None
    for i in range(rows):
        for j in range(cols):
            if counters[i][j] > best:
                best, c1 = counters[i][j], (i, j)
    far, c2 = -1.0, None
    for a, b in neighbors4(rows, cols, *c1):
        d = math.sqrt(sum((p - q) ** 2 for p, q in zip(w[c1[0]][c1[1]], w[a][b])))
        if d > far:
            far, c2 = d, (a, b)
    return c1, c2


def insert(w, c1, c2):
    rows, cols = len(w), len(w[0])
    (i1, j1), (i2, j2) = c1, c2
    if i1 == i2:
        lo = min(j1, j2)
        return [
            [w[i][j] for j in range(lo + 1)]
            + [[(p + q) / 2.0 for p, q in zip(w[i][lo], w[i][lo + 1])]]
            + [w[i][j] for j in range(lo + 1, cols)]
            for i in range(rows)
        ]
    lo = min(i1, i2)
    mid = [[[(p + q) / 2.0 for p, q in zip(w[lo][j], w[lo + 1][j])] for j in range(cols)]]
    return w[:lo + 1] + mid + w[lo + 1:]


def max_abs_diff(a, b):
    """Largest coordinate difference between two nested (rows, cols, dim) structures."""
    return max(abs(float(p) - float(q)) for ra, rb in zip(a, b) for ca, cb in zip(ra, rb)
               for p, q in zip(ca, cb))


def polyline_length(points):
    return sum(math.dist(points[k], points[k + 1]) for k in range(len(points) - 1))
