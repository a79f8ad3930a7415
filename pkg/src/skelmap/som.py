"""Fixed-size Kohonen feature map.

Net input is the Euclidean distance ``s = ||x - w||``, activity is
``y = exp(-s / sigma)`` and the winner is the neuron of maximal activity.
Training moves every weight towards the input by ``alpha(t) * G * (x - w)``
with ``G = exp(-d / (2 sigma_r(t)**2))``, ``d`` being the lattice distance to
the winner (``neighborhood="squared"`` uses ``d**2`` instead).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _kernels
from .errors import ModelFormatError, ValidationError

NEIGHBORHOODS = ("as-printed", "squared")


class Lattice:
    """A rows x cols grid of weight vectors, ``weights`` shaped ``(rows, cols, dim)``."""

    def __init__(self, weights: np.ndarray):
        w = np.array(weights, dtype=np.float64)
        if w.ndim != 3 or min(w.shape) < 1:
            raise ValidationError(f"lattice weights must be (rows, cols, dim), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("lattice weights must be finite")
        self.weights = w

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def dim(self) -> int:
        return self.weights.shape[2]

    @property
    def shape(self) -> tuple:
        return self.weights.shape[:2]

    @property
    def n_neurons(self) -> int:
        return self.rows * self.cols

    @property
    def flat(self) -> np.ndarray:
        """``(rows*cols, dim)`` view in row-major neuron order."""
        return self.weights.reshape(-1, self.dim)

    @property
    def positions(self) -> np.ndarray:
        """Lattice coordinates ``(i, j)`` of every neuron, row-major, as floats."""
        i, j = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        return np.stack([i.ravel(), j.ravel()], axis=1).astype(np.float64)

    def copy(self) -> "Lattice":
        return Lattice(self.weights.copy())

    def __eq__(self, other):
        return isinstance(other, Lattice) and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"Lattice(rows={self.rows}, cols={self.cols}, dim={self.dim})"

    def to_bytes(self) -> bytes:
        """Dims header (three little-endian uint32) then row-major ``<f8`` weights."""
        return struct.pack("<III", self.rows, self.cols, self.dim) + self.weights.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0):
        """Decode a lattice; returns ``(lattice, next_offset)``."""
        try:
            rows, cols, dim = struct.unpack_from("<III", data, offset)
        except struct.error as exc:
            raise ModelFormatError(f"truncated lattice header: {exc}") from None
        offset += 12
        n = rows * cols * dim * 8
        if len(data) < offset + n:
            raise ModelFormatError("truncated lattice weights")
        w = np.frombuffer(data, dtype="<f8", count=rows * cols * dim, offset=offset)
        return cls(w.reshape(rows, cols, dim).astype(np.float64)), offset + n


@dataclass(frozen=True)
class SomParams:
    """Training schedule of a feature map.

    ``sigma_r0=None`` means half the longer lattice side, so the initial
    neighborhood covers the whole map.
    """

    sigma: float = 1.0
    alpha0: float = 0.1
    alpha_min: float = 0.01
    sigma_r0: float | None = None
    sigma_r_min: float = 1.0
    epochs: int = 10
    seed: int = 0
    neighborhood: str = "as-printed"

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha0 <= 1:
            raise ValidationError("need 0 < alpha_min <= alpha0 <= 1")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if not self.sigma_r_min > 0:
            raise ValidationError("sigma_r_min must be positive")
        if self.sigma_r0 is not None and self.sigma_r0 < self.sigma_r_min:
            raise ValidationError("sigma_r0 must be >= sigma_r_min")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.neighborhood not in NEIGHBORHOODS:
            raise ValidationError(f"neighborhood must be one of {NEIGHBORHOODS}")

    def radius0(self, rows: int, cols: int) -> float:
        if self.sigma_r0 is not None:
            return self.sigma_r0
        return max(max(rows, cols) / 2.0, self.sigma_r_min)


def init_lattice(rows: int, cols: int, dim: int, seed: int) -> Lattice:
    """Weights drawn i.i.d. uniform on [0, 1)."""
    if min(rows, cols, dim) < 1:
        raise ValidationError("rows, cols and dim must be >= 1")
    rng = np.random.default_rng(seed)
    return Lattice(rng.random((rows, cols, dim)))


def _check_input(lattice: Lattice, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (lattice.dim,):
        raise ValidationError(f"input has shape {x.shape}, lattice dim is {lattice.dim}")
    return x


def net_input(lattice: Lattice, x) -> np.ndarray:
    x = _check_input(lattice, x)
    return np.sqrt(np.sum((lattice.weights - x) ** 2, axis=-1))


def activity(lattice: Lattice, x, sigma: float = 1.0) -> np.ndarray:
    """Activity map ``exp(-||x - w_ij|| / sigma)``, shape ``(rows, cols)``."""
    return np.exp(-net_input(lattice, x) / sigma)


def winner(act: np.ndarray) -> tuple:
    """Position of the maximal activity; ties go to the first row-major index."""
    a = np.asarray(act)
    if a.size == 0:
        raise ValidationError("empty activity map")
    k = int(np.argmax(a))
    return divmod(k, a.shape[1]) if a.ndim == 2 else (k, 0)


def best_matching(lattice: Lattice, x) -> tuple:
    """Winner neuron for ``x``; same result as ``winner(activity(lattice, x))``."""
    return divmod(int(np.argmin(net_input(lattice, x))), lattice.cols)


def best_matching_many(lattice: Lattice, inputs: np.ndarray) -> np.ndarray:
    """Row-major winner index for every row of ``inputs``."""
    x = np.ascontiguousarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != lattice.dim:
        raise ValidationError(f"inputs must be (n, {lattice.dim})")
    return _kernels.nearest_many(np.ascontiguousarray(lattice.flat), x)


def schedule(start: float, end: float, t: int, total: int) -> float:
    """Exponential decay from ``start`` at ``t=0`` to ``end`` at ``t=total-1``."""
    if total <= 1:
        return start
    return start * (end / start) ** (t / (total - 1))


def lattice_distances(rows: int, cols: int) -> np.ndarray:
    """Euclidean distances between all pairs of lattice positions, ``(n, n)``."""
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    pos = np.stack([i.ravel(), j.ravel()], axis=1).astype(np.float64)
    return np.sqrt(np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1))


def neighborhood(dist: np.ndarray, sigma_r: float, mode: str = "as-printed") -> np.ndarray:
    d = dist ** 2 if mode == "squared" else dist
    return np.exp(-d / (2.0 * sigma_r ** 2))


def train_step(lattice: Lattice, x, t: int, params: SomParams, total_steps: int,
               inplace: bool = False) -> Lattice:
    """One adaptation step at presentation ``t`` of ``total_steps``."""
    x = _check_input(lattice, x)
    out = lattice if inplace else lattice.copy()
    alpha = schedule(params.alpha0, params.alpha_min, t, total_steps)
    sigma_r = schedule(params.radius0(out.rows, out.cols), params.sigma_r_min, t, total_steps)
    wi, wj = winner(activity(out, x, params.sigma))
    i, j = np.meshgrid(np.arange(out.rows), np.arange(out.cols), indexing="ij")
    dist = np.sqrt((i - wi) ** 2 + (j - wj) ** 2)
    g = neighborhood(dist, sigma_r, params.neighborhood)
    out.weights += (alpha * g)[..., None] * (x - out.weights)
    return out


def schedule_array(start: float, end: float, total: int) -> np.ndarray:
    """``schedule`` evaluated at every ``t`` in ``range(total)``."""
    if total <= 1:
        return np.full(max(total, 0), float(start))
    return start * (end / start) ** (np.arange(total) / (total - 1))


def train(lattice: Lattice, inputs, params: SomParams,
          callback: Callable[[int, Lattice], None] | None = None, callback_every: int = 0) -> Lattice:
    """Train a copy of ``lattice`` for ``params.epochs`` shuffled passes over ``inputs``.

    ``callback(presentations, lattice)`` is invoked every ``callback_every``
    presentations (and after the last one) when given.
    """
    x = np.ascontiguousarray(inputs, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValidationError("inputs must be a non-empty (n, dim) matrix")
    if x.shape[1] != lattice.dim:
        raise ValidationError(f"inputs have dim {x.shape[1]}, lattice dim is {lattice.dim}")
    out = lattice.copy()
    rng = np.random.default_rng(params.seed)
    total = params.epochs * len(x)
    order = np.concatenate([rng.permutation(len(x)) for _ in range(params.epochs)])
    alphas = schedule_array(params.alpha0, params.alpha_min, total)
    radii = schedule_array(params.radius0(out.rows, out.cols), params.sigma_r_min, total)
    dist = lattice_distances(out.rows, out.cols)
    if params.neighborhood == "squared":
        dist = dist ** 2
    flat = np.ascontiguousarray(out.flat)
    step = callback_every if (callback is not None and callback_every) else total
    for start in range(0, total, step):
        stop = min(start + step, total)
        _kernels.som_epochs(flat, x, order[start:stop], alphas[start:stop], radii[start:stop], dist)
        if callback is not None and callback_every:
            out.weights = flat.reshape(out.weights.shape)
            callback(stop, out)
    out.weights = flat.reshape(out.weights.shape)
    return out


def quantization_error(lattice: Lattice, inputs) -> float:
    """Mean distance from each input to its best-matching weight vector."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValidationError("inputs must be a non-empty (n, dim) matrix")
    win = best_matching_many(lattice, x)
    return float(np.mean(np.linalg.norm(x - lattice.flat[win], axis=1)))


def topographic_error(lattice: Lattice, inputs) -> float:
    """Fraction of inputs whose two closest neurons are not 4-neighbors on the lattice."""
    x = np.asarray(inputs, dtype=np.float64)
    w = lattice.flat
    errors = 0
    for start in range(0, len(x), 2048):
        chunk = x[start:start + 2048]
        d = np.linalg.norm(chunk[:, None, :] - w[None, :, :], axis=-1)
        two = np.argsort(d, axis=1, kind="stable")[:, :2]
        r1, c1 = np.divmod(two[:, 0], lattice.cols)
        r2, c2 = np.divmod(two[:, 1], lattice.cols)
        errors += int(np.sum(np.abs(r1 - r2) + np.abs(c1 - c2) != 1))
    return errors / len(x)


def with_seed(params: SomParams, seed: int) -> SomParams:
    return replace(params, seed=seed)
