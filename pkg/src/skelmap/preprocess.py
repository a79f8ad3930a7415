"""Distance/orientation normalization, attention and dynamics.

The per-frame chain is: rescale every link to its standard length, move
into the body-attached (ego) frame at the Stomach, keep the attended joints,
then append velocity/acceleration blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSkeleton, ValidationError
from .skeleton import ActionSequence, LabeledDataset, PostureFrame, SkeletonTopology, link_lengths

log = logging.getLogger(__name__)

DEGENERATE_EPS = 1e-6


@dataclass(frozen=True)
class PreprocessConfig:
    attention_joints: tuple
    standard_link_lengths: tuple
    dynamics_order: int = 0
    block_scales: tuple = ()

    def __post_init__(self):
        att = tuple(int(j) for j in self.attention_joints)
        if not att:
            raise ValidationError("attention_joints must be non-empty")
        if len(set(att)) != len(att):
            raise ValidationError("attention_joints contains duplicates")
        object.__setattr__(self, "attention_joints", att)
        lengths = tuple(float(v) for v in self.standard_link_lengths)
        if any(not v > 0 for v in lengths):
            raise ValidationError("standard link lengths must be positive")
        object.__setattr__(self, "standard_link_lengths", lengths)
        if self.dynamics_order not in (0, 1, 2):
            raise ValidationError("dynamics_order must be 0, 1 or 2")
        scales = tuple(float(s) for s in self.block_scales) or (1.0,) * (self.dynamics_order + 1)
        if len(scales) != self.dynamics_order + 1:
            raise ValidationError("need one block scale per dynamics block")
        object.__setattr__(self, "block_scales", scales)

    @property
    def input_dim(self) -> int:
        return 3 * len(self.attention_joints) * (1 + self.dynamics_order)

    def to_dict(self) -> dict:
        return {
            "attention_joints": list(self.attention_joints),
            "standard_link_lengths": list(self.standard_link_lengths),
            "dynamics_order": self.dynamics_order,
            "block_scales": list(self.block_scales),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(
            tuple(d["attention_joints"]),
            tuple(d["standard_link_lengths"]),
            int(d["dynamics_order"]),
            tuple(d["block_scales"]),
        )


@dataclass(frozen=True, eq=False)
class EgoBasis:
    """Origin (the Stomach) and a 3x3 matrix whose rows are the X, Y, Z axes."""

    origin: np.ndarray
    axes: np.ndarray


def _joints(frame) -> np.ndarray:
    return frame.joints if isinstance(frame, PostureFrame) else np.asarray(frame, dtype=np.float64)


def _hip_indices(topology: SkeletonTopology):
    return topology.index("Stomach"), topology.index("LeftHip"), topology.index("RightHip")


def _ego_axes(stomach, left, right):
    """Vectorized basis construction over leading axes; returns (origin, axes)."""
    hip = left - right
    hip_len = np.linalg.norm(hip, axis=-1)
    if np.any(hip_len < DEGENERATE_EPS):
        raise DegenerateSkeleton("LeftHip and RightHip coincide")
    u = hip / hip_len[..., None]
    proj = right + np.sum((stomach - right) * u, axis=-1)[..., None] * u
    up = stomach - proj
    up_len = np.linalg.norm(up, axis=-1)
    if np.any(up_len < DEGENERATE_EPS):
        raise DegenerateSkeleton("Stomach lies on the hip line")
    z = up / up_len[..., None]
    side = left - proj
    side_len = np.linalg.norm(side, axis=-1)
    # the Stomach projecting exactly onto LeftHip leaves only the hip direction
    y = np.where((side_len < DEGENERATE_EPS)[..., None], u, side / np.maximum(side_len, 1e-300)[..., None])
    x = np.cross(y, z)
    x = x / np.linalg.norm(x, axis=-1)[..., None]
    return stomach, np.stack([x, y, z], axis=-2)


def ego_basis(frame, topology: SkeletonTopology) -> EgoBasis:
    j = _joints(frame)
    s, l, r = _hip_indices(topology)
    origin, axes = _ego_axes(j[s], j[l], j[r])
    return EgoBasis(origin.copy(), axes)


def transform_frame(frame, basis: EgoBasis) -> PostureFrame:
    j = _joints(frame)
    return PostureFrame((j - basis.origin) @ basis.axes.T)


def ego_transform(positions: np.ndarray, topology: SkeletonTopology) -> np.ndarray:
    """Apply the per-frame ego transform to a ``(T, N, 3)`` array."""
    s, l, r = _hip_indices(topology)
    origin, axes = _ego_axes(positions[:, s], positions[:, l], positions[:, r])
    return np.einsum("tnk,tdk->tnd", positions - origin[:, None, :], axes)


def compute_standard_lengths(train: LabeledDataset, topology: SkeletonTopology) -> np.ndarray:
    """Mean length of every link over all training frames, in ``topology.links`` order."""
    if len(train) == 0:
        raise ValidationError("empty training set")
    total = np.zeros(len(topology.links))
    count = 0
    for seq in train:
        total += link_lengths(seq.positions, topology).sum(axis=0)
        count += len(seq)
    mean = total / count
    if np.any(mean < DEGENERATE_EPS):
        bad = [topology.joint_names[c] for (p, c), m in zip(topology.links, mean) if m < DEGENERATE_EPS]
        raise DegenerateSkeleton(f"zero-length links ending at {bad}")
    return mean


def rescale_positions(positions: np.ndarray, standard_lengths, topology: SkeletonTopology,
                      previous_directions: np.ndarray | None = None):
    """Rescale links of a ``(T, N, 3)`` array.

    Returns the rescaled positions and the unit link directions of the last
    frame (to seed the zero-length fallback of a following chunk).
    """
    old = np.asarray(positions, dtype=np.float64)
    std = np.asarray(standard_lengths, dtype=np.float64)
    new = np.empty_like(old)
    root = topology.root
    new[:, root] = old[:, root]
    last_dirs = np.empty((len(std), 3))
    for k, (p, c) in enumerate(topology.links):
        d = old[:, c] - old[:, p]
        n = np.linalg.norm(d, axis=-1)
        zero = n < 1e-12
        unit = d / np.where(zero, 1.0, n)[:, None]
        if np.any(zero):
            log.debug("zero-length link %s-%s in %d frames", p, c, int(zero.sum()))
            fallback = np.array([0.0, 0.0, 1.0]) if previous_directions is None else previous_directions[k]
            for t in np.flatnonzero(zero):
                unit[t] = unit[t - 1] if t > 0 else fallback
        new[:, c] = new[:, p] + std[k] * unit
        last_dirs[k] = unit[-1]
    return new, last_dirs


def rescale_links(frame, standard_lengths, topology: SkeletonTopology,
                  previous_directions: np.ndarray | None = None) -> PostureFrame:
    new, _ = rescale_positions(_joints(frame)[None], standard_lengths, topology, previous_directions)
    return PostureFrame(new[0])


def dynamics(positions: np.ndarray, order: int, block_scales=None) -> np.ndarray:
    """Append forward-difference velocity/acceleration blocks.

    ``positions`` is ``(T, F)``; the result is ``(T, F * (1 + order))``. The
    last difference is repeated so that ``T`` is preserved.
    """
    if isinstance(positions, ActionSequence):
        positions = positions.positions
    p = np.asarray(positions, dtype=np.float64)
    p = p.reshape(p.shape[0], -1)
    if order not in (0, 1, 2):
        raise ValidationError("order must be 0, 1 or 2")
    if p.shape[0] < order + 1:
        raise ValidationError(f"need at least {order + 1} frames for order {order}")
    scales = np.ones(order + 1) if block_scales is None else np.asarray(block_scales, dtype=np.float64)
    blocks = [p]
    if order >= 1:
        v = np.diff(p, axis=0)
        v = np.vstack([v, v[-1:]])
        blocks.append(v)
        if order == 2:
            a = np.diff(v, axis=0)
            a = np.vstack([a, a[-1:]])
            blocks.append(a)
    return np.hstack([b * s for b, s in zip(blocks, scales)])


def attended_positions(positions: np.ndarray, config: PreprocessConfig, topology: SkeletonTopology,
                       previous_directions=None):
    """Rescale, ego-transform and attention-filter; returns ``(T, 3*|attention|)`` and link directions."""
    scaled, dirs = rescale_positions(positions, config.standard_link_lengths, topology, previous_directions)
    ego = ego_transform(scaled, topology)
    att = ego[:, list(config.attention_joints), :]
    return att.reshape(att.shape[0], -1), dirs


def preprocess_sequence(seq: ActionSequence, config: PreprocessConfig, topology: SkeletonTopology) -> np.ndarray:
    """Turn a sequence into its ``(T, D)`` matrix of first-map input vectors."""
    if len(config.standard_link_lengths) != len(topology.links):
        raise ValidationError("standard lengths do not match topology links")
    positions = seq.positions if isinstance(seq, ActionSequence) else np.asarray(seq)
    flat, _ = attended_positions(positions, config, topology)
    return dynamics(flat, config.dynamics_order, config.block_scales)


def fit_preprocess(train: LabeledDataset, topology: SkeletonTopology, attention_joints,
                   dynamics_order: int = 0) -> PreprocessConfig:
    """Standard link lengths and unit-RMS block scales from training data only."""
    att = tuple(topology.index(j) if isinstance(j, str) else int(j) for j in attention_joints)
    lengths = compute_standard_lengths(train, topology)
    unscaled = PreprocessConfig(att, tuple(lengths), dynamics_order)
    width = 3 * len(att)
    sq = np.zeros(dynamics_order + 1)
    count = 0
    for seq in train:
        m = preprocess_sequence(seq, unscaled, topology)
        for b in range(dynamics_order + 1):
            sq[b] += np.sum(m[:, b * width:(b + 1) * width] ** 2)
        count += m.shape[0] * width
    rms = np.sqrt(sq / count)
    scales = tuple(1.0 / r if r > 1e-12 else 1.0 for r in rms)
    return PreprocessConfig(att, tuple(lengths), dynamics_order, scales)
