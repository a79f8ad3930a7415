"""Growing grid: a feature map that inserts whole rows or columns while it learns.

During growth every winner increments its local counter and it and its
direct (4-connected) neighbors move towards the input with a constant rate.
Every ``lambda * n_neurons`` presentations a row or column is inserted
between the most frequent winner and its most distant direct neighbor, and
all counters are cleared. Fine-tuning then continues at fixed size with a
decaying rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels, som
from .errors import LogicError, ValidationError
from .som import Lattice

GROWTH = "growth"
FINE_TUNE = "finetune"


@dataclass(frozen=True)
class FineTuneParams:
    alpha0: float = 0.1
    alpha_min: float = 0.01
    epochs: int = 5
    neighborhood: str = "direct"
    sigma_r0: float = 1.0
    sigma_r_min: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha0 <= 1:
            raise ValidationError("need 0 < alpha_min <= alpha0 <= 1")
        if self.epochs < 0:
            raise ValidationError("finetune epochs must be >= 0")
        if self.neighborhood not in ("direct", "gaussian"):
            raise ValidationError("finetune neighborhood must be 'direct' or 'gaussian'")


@dataclass(frozen=True)
class GGParams:
    lambda_: int = 30
    alpha_growth: float = 0.1
    sigma: float = 1.0
    max_neurons: int = 900
    qe_stop: float | None = None
    finetune: FineTuneParams = field(default_factory=FineTuneParams)
    seed: int = 0

    def __post_init__(self):
        if self.lambda_ < 1:
            raise ValidationError("lambda must be >= 1")
        if not 0 < self.alpha_growth <= 1:
            raise ValidationError("alpha_growth must lie in (0, 1]")
        if self.max_neurons < 4:
            raise ValidationError("max_neurons must be >= 4")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")


@dataclass
class GrowingGrid:
    lattice: Lattice
    counters: np.ndarray
    phase: str = GROWTH
    presentations_since_insertion: int = 0
    presentations: int = 0

    def __post_init__(self):
        self.counters = np.asarray(self.counters, dtype=np.int64)
        if self.counters.shape != self.lattice.shape:
            raise ValidationError("counter array must match the lattice shape")
        if np.any(self.counters < 0):
            raise ValidationError("local counters must be non-negative")

    @property
    def shape(self) -> tuple:
        return self.lattice.shape

    @property
    def n_neurons(self) -> int:
        return self.lattice.n_neurons

    def copy(self) -> "GrowingGrid":
        return GrowingGrid(self.lattice.copy(), self.counters.copy(), self.phase,
                           self.presentations_since_insertion, self.presentations)


def init_gg(dim: int, seed: int) -> GrowingGrid:
    """A 2x2 grid with uniform [0, 1) weights and zero counters."""
    return GrowingGrid(som.init_lattice(2, 2, dim, seed), np.zeros((2, 2), dtype=np.int64))


def direct_neighbors(rows: int, cols: int, i: int, j: int) -> list:
    """Existing 4-neighbors of ``(i, j)`` in row-major order: up, left, right, down."""
    cand = [(i - 1, j), (i, j - 1), (i, j + 1), (i + 1, j)]
    return [(a, b) for a, b in cand if 0 <= a < rows and 0 <= b < cols]


def _direct_update(lattice: Lattice, win: tuple, x: np.ndarray, alpha: float):
    rows, cols = lattice.shape
    cells = [win] + direct_neighbors(rows, cols, *win)
    idx = tuple(np.array(cells).T)
    w = lattice.weights
    w[idx] += alpha * (x - w[idx])


def gg_step(g: GrowingGrid, x, params: GGParams, inplace: bool = False) -> GrowingGrid:
    """One growth-phase presentation."""
    x = som._check_input(g.lattice, x)
    out = g if inplace else g.copy()
    win = som.winner(som.activity(out.lattice, x, params.sigma))
    out.counters[win] += 1
    _direct_update(out.lattice, win, x, params.alpha_growth)
    out.presentations_since_insertion += 1
    out.presentations += 1
    return out


def insertion_due(g: GrowingGrid, params: GGParams) -> bool:
    return g.presentations_since_insertion >= params.lambda_ * g.n_neurons


def find_insertion_pair(g: GrowingGrid) -> tuple:
    """``(c1, c2)``: most frequent winner and its most distant direct neighbor."""
    rows, cols = g.shape
    c1 = divmod(int(np.argmax(g.counters)), cols)
    w = g.lattice.weights
    best, c2 = -1.0, None
    for nb in direct_neighbors(rows, cols, *c1):
        d = float(np.linalg.norm(w[c1] - w[nb]))
        if d > best:
            best, c2 = d, nb
    return c1, c2


def insert_between(g: GrowingGrid, c1: tuple, c2: tuple) -> GrowingGrid:
    """Insert a row or column between adjacent neurons ``c1`` and ``c2``.

    New weights are the mean of the two flanking rows/columns; counters and
    the presentation count are reset.
    """
    (i1, j1), (i2, j2) = c1, c2
    w = g.lattice.weights
    if i1 == i2 and abs(j1 - j2) == 1:
        lo = min(j1, j2)
        new = 0.5 * (w[:, lo] + w[:, lo + 1])
        grown = np.insert(w, lo + 1, new, axis=1)
    elif j1 == j2 and abs(i1 - i2) == 1:
        lo = min(i1, i2)
        new = 0.5 * (w[lo] + w[lo + 1])
        grown = np.insert(w, lo + 1, new, axis=0)
    else:
        raise LogicError(f"neurons {c1} and {c2} are not direct neighbors")
    return GrowingGrid(Lattice(grown), np.zeros(grown.shape[:2], dtype=np.int64), g.phase, 0,
                       g.presentations)


def _as_inputs(inputs, dim) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValidationError("inputs must be a non-empty (n, dim) matrix")
    if x.shape[1] != dim:
        raise ValidationError(f"inputs have dim {x.shape[1]}, grid dim is {dim}")
    return x


def grow(g: GrowingGrid, inputs, params: GGParams,
         on_insert: Callable[[GrowingGrid, GrowingGrid, tuple, tuple], None] | None = None,
         callback: Callable[[int, GrowingGrid], None] | None = None, callback_every: int = 0,
         qe_check_every: int = 1000) -> GrowingGrid:
    """Growth phase: present shuffled inputs and insert rows/columns until a stop rule fires.

    Growth stops once the grid has ``max_neurons`` neurons or, when
    ``qe_stop`` is set, the quantization error (checked every
    ``qe_check_every`` presentations) drops to it. ``on_insert(before, after,
    c1, c2)`` observes each insertion and ``callback(presentations, grid)``
    is called every ``callback_every`` presentations.
    """
    x = np.ascontiguousarray(_as_inputs(inputs, g.lattice.dim))
    out = g.copy()
    out.phase = GROWTH
    rng = np.random.default_rng(params.seed)
    while out.n_neurons < params.max_neurons:
        order = rng.permutation(len(x))
        pos = 0
        while pos < len(order) and out.n_neurons < params.max_neurons:
            budget = params.lambda_ * out.n_neurons - out.presentations_since_insertion
            for every in (callback_every if callback is not None else 0,
                          qe_check_every if params.qe_stop is not None else 0):
                if every:
                    budget = min(budget, every - out.presentations % every)
            rows, cols = out.shape
            flat = out.lattice.flat
            counts = out.counters.reshape(-1)
            done = _kernels.growth_steps(flat, rows, cols, counts, x, order, pos,
                                         params.alpha_growth, max(budget, 1))
            pos += done
            out.presentations += done
            out.presentations_since_insertion += done
            if callback is not None and callback_every and out.presentations % callback_every == 0:
                callback(out.presentations, out)
            if (params.qe_stop is not None and out.presentations % qe_check_every == 0
                    and som.quantization_error(out.lattice, x) <= params.qe_stop):
                out.phase = FINE_TUNE
                return out
            if insertion_due(out, params):
                c1, c2 = find_insertion_pair(out)
                grown = insert_between(out, c1, c2)
                if on_insert is not None:
                    on_insert(out, grown, c1, c2)
                out = grown
    out.phase = FINE_TUNE
    return out


def fine_tune(g: GrowingGrid, inputs, params: GGParams,
              callback: Callable[[int, GrowingGrid], None] | None = None,
              callback_every: int = 0) -> GrowingGrid:
    """Fixed-size training with an exponentially decaying rate.

    ``callback(presentations, grid)`` counts presentations cumulatively over
    growth and fine-tuning.
    """
    if g.phase != FINE_TUNE:
        raise ValidationError("fine_tune requires a grid in the fine-tune phase")
    ft = params.finetune
    x = np.ascontiguousarray(_as_inputs(inputs, g.lattice.dim))
    out = g.copy()
    rng = np.random.default_rng(params.seed + 1)
    total = ft.epochs * len(x)
    if total == 0:
        return out
    order = np.concatenate([rng.permutation(len(x)) for _ in range(ft.epochs)])
    alphas = finetune_alphas(ft, total)
    rows, cols = out.shape
    flat = out.lattice.flat
    if ft.neighborhood == "gaussian":
        dist = som.lattice_distances(rows, cols)
        radii = som.schedule_array(ft.sigma_r0, ft.sigma_r_min, total)
    step = callback_every if (callback is not None and callback_every) else total
    for start in range(0, total, step):
        stop = min(start + step, total)
        if ft.neighborhood == "gaussian":
            _kernels.som_epochs(flat, x, order[start:stop], alphas[start:stop], radii[start:stop], dist)
        else:
            _kernels.finetune_direct(flat, rows, cols, x, order[start:stop], alphas[start:stop])
        out.presentations += stop - start
        if callback is not None and callback_every:
            callback(out.presentations, out)
    return out


def finetune_alphas(ft: FineTuneParams, total: int) -> np.ndarray:
    """Per-presentation fine-tuning rate, decaying from ``alpha0`` to ``alpha_min``."""
    return som.schedule_array(ft.alpha0, ft.alpha_min, total)


def fit_grid(inputs, params: GGParams, on_insert=None, callback=None, callback_every: int = 0) -> GrowingGrid:
    """``init_gg``, ``grow`` and ``fine_tune`` in sequence."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("inputs must be a (n, dim) matrix")
    g = grow(init_gg(x.shape[1], params.seed), x, params, on_insert=on_insert,
             callback=callback, callback_every=callback_every)
    return fine_tune(g, x, params, callback=callback, callback_every=callback_every)
