"""Parametric synthetic actions on the 20-joint tree.

Each action is a short list of key poses (limb elevation/azimuth angles)
blended with a cosine ease, starting and ending at the rest pose. Every
sequence gets its own performer size, speed, amplitude, viewing angle and
position, plus Gaussian joint noise that is smoothed over time.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ValidationError
from .skeleton import ActionSequence, LabeledDataset, SkeletonTopology, default_topology, serialize_msr

# limb segment -> (start joint, end joint, length in meters, side: +1 left / -1 right)
SEGMENTS = {
    "lu": ("LeftShoulder", "LeftElbow", 0.28, 1),
    "lf": ("LeftElbow", "LeftWrist", 0.25, 1),
    "ru": ("RightShoulder", "RightElbow", 0.28, -1),
    "rf": ("RightElbow", "RightWrist", 0.25, -1),
    "lt": ("LeftHip", "LeftKnee", 0.42, 1),
    "ls": ("LeftKnee", "LeftAnkle", 0.40, 1),
    "rt": ("RightHip", "RightKnee", 0.42, -1),
    "rs": ("RightKnee", "RightAnkle", 0.40, -1),
}

TORSO = {
    "Stomach": (0.0, 1.07, 0.0),
    "Spine": (0.0, 1.20, 0.0),
    "ShoulderCenter": (0.0, 1.45, 0.0),
    "Head": (0.0, 1.65, 0.0),
    "LeftShoulder": (0.18, 1.42, 0.0),
    "RightShoulder": (-0.18, 1.42, 0.0),
    "LeftHip": (0.10, 0.92, 0.0),
    "RightHip": (-0.10, 0.92, 0.0),
}

HAND_LEN = 0.08
FOOT = np.array([0.0, -0.3, 0.95]) / np.linalg.norm([0.0, -0.3, 0.95]) * 0.12

# (elevation from hanging down, azimuth: 0 forward, 90 outward, 180 back, -90 inward), degrees
ACTIONS = {
    "right_arm_raise": [
        (0.5, {"ru": (165, 0), "rf": (170, 0)}),
    ],
    "right_hand_wave": [
        (0.3, {"ru": (95, 90), "rf": (160, 60)}),
        (0.45, {"ru": (95, 90), "rf": (160, 120)}),
        (0.6, {"ru": (95, 90), "rf": (160, 60)}),
        (0.75, {"ru": (95, 90), "rf": (160, 120)}),
    ],
    "left_leg_kick": [
        (0.35, {"lt": (60, 0), "ls": (10, 180)}),
        (0.6, {"lt": (80, 0), "ls": (75, 0)}),
    ],
    "two_hand_clap": [
        (0.3, {"lu": (80, 45), "lf": (85, 30), "ru": (80, 45), "rf": (85, 30)}),
        (0.45, {"lu": (80, 10), "lf": (85, -20), "ru": (80, 10), "rf": (85, -20)}),
        (0.6, {"lu": (80, 45), "lf": (85, 30), "ru": (80, 45), "rf": (85, 30)}),
        (0.75, {"lu": (80, 10), "lf": (85, -20), "ru": (80, 10), "rf": (85, -20)}),
    ],
    "left_arm_side_raise": [
        (0.5, {"lu": (110, 90), "lf": (115, 90)}),
    ],
    "squat": [
        (0.5, {"lt": (85, 0), "ls": (20, 180), "rt": (85, 0), "rs": (20, 180),
               "lu": (80, 0), "lf": (80, 0), "ru": (80, 0), "rf": (80, 0)}),
    ],
    "right_punch": [
        (0.3, {"ru": (20, 180), "rf": (110, 0)}),
        (0.55, {"ru": (90, 0), "rf": (90, 0)}),
    ],
    "left_hand_wave": [
        (0.3, {"lu": (95, 90), "lf": (160, 60)}),
        (0.45, {"lu": (95, 90), "lf": (160, 120)}),
        (0.6, {"lu": (95, 90), "lf": (160, 60)}),
        (0.75, {"lu": (95, 90), "lf": (160, 120)}),
    ],
}

ACTION_NAMES = tuple(ACTIONS)


def _direction(elev, azim, side):
    a, p = np.radians(elev), np.radians(azim)
    return np.stack([side * np.sin(a) * np.sin(p), -np.cos(a), np.sin(a) * np.cos(p)], axis=-1)


def _angles(name: str, u: np.ndarray, amp: float) -> dict:
    """Per-segment (elevation, azimuth) arrays over phases ``u`` in [0, 1]."""
    keys = [(0.0, {}), (0.12, {})] + [(t, pose) for t, pose in ACTIONS[name]] + [(0.88, {}), (1.0, {})]
    out = {}
    for seg in SEGMENTS:
        elev = np.array([amp * pose.get(seg, (0.0, 0.0))[0] for _, pose in keys])
        azim = np.array([pose.get(seg, (0.0, 0.0))[1] for _, pose in keys])
        # a resting segment takes the azimuth of the next active pose to avoid spurious swings
        for k in range(len(keys)):
            if seg not in keys[k][1]:
                nxt = [pose[seg][1] for _, pose in keys[k:] if seg in pose] or \
                      [pose[seg][1] for _, pose in keys[:k][::-1] if seg in pose] or [0.0]
                azim[k] = nxt[0]
        times = np.array([t for t, _ in keys])
        seg_i = np.clip(np.searchsorted(times, u, side="right") - 1, 0, len(times) - 2)
        frac = (u - times[seg_i]) / (times[seg_i + 1] - times[seg_i])
        ease = 0.5 - 0.5 * np.cos(np.pi * np.clip(frac, 0.0, 1.0))
        out[seg] = (elev[seg_i] + ease * (elev[seg_i + 1] - elev[seg_i]),
                    azim[seg_i] + ease * (azim[seg_i + 1] - azim[seg_i]))
    return out


def pose_sequence(name: str, n_frames: int, topology: SkeletonTopology, scale: float = 1.0,
                  amp: float = 1.0) -> np.ndarray:
    """Noise-free body-frame joint positions ``(n_frames, N, 3)`` for one action."""
    if name not in ACTIONS:
        raise ValidationError(f"unknown action {name!r}")
    u = np.linspace(0.0, 1.0, n_frames)
    ang = _angles(name, u, amp)
    idx = topology.index
    pos = np.zeros((n_frames, topology.n_joints, 3))
    for joint, xyz in TORSO.items():
        pos[:, idx(joint)] = np.asarray(xyz) * scale
    for seg, (start, end, length, side) in SEGMENTS.items():
        elev, azim = ang[seg]
        pos[:, idx(end)] = pos[:, idx(start)] + scale * length * _direction(elev, azim, side)
    for side in ("Left", "Right"):
        fore = pos[:, idx(f"{side}Wrist")] - pos[:, idx(f"{side}Elbow")]
        fore /= np.linalg.norm(fore, axis=1, keepdims=True)
        pos[:, idx(f"{side}Hand")] = pos[:, idx(f"{side}Wrist")] + scale * HAND_LEN * fore
        pos[:, idx(f"{side}Foot")] = pos[:, idx(f"{side}Ankle")] + scale * FOOT
    # keep the lower foot on the floor
    floor = np.minimum(pos[:, idx("LeftFoot"), 1], pos[:, idx("RightFoot"), 1])
    pos[:, :, 1] -= (floor - floor[0])[:, None]
    return pos


def _yaw(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def joint_noise(rng: np.random.Generator, shape: tuple, sigma: float, smoothing: float) -> np.ndarray:
    """Gaussian noise of std ``sigma``, low-pass filtered along time (axis 0).

    ``smoothing`` is the std of the temporal Gaussian kernel in frames; 0
    gives i.i.d. noise.
    """
    white = rng.normal(0.0, 1.0, size=shape)
    if smoothing > 0:
        white = gaussian_filter1d(white, smoothing, axis=0, mode="nearest")
        white /= max(float(white.std()), 1e-12)
    return sigma * white


def generate_sequence(name: str, rng: np.random.Generator, topology: SkeletonTopology,
                      noise: float = 0.005, source_id: str = "", smoothing: float = 2.0) -> ActionSequence:
    n_frames = int(rng.integers(30, 51))
    scale = rng.uniform(0.85, 1.15)
    amp = rng.uniform(0.9, 1.1)
    body = pose_sequence(name, n_frames, topology, scale, amp)
    rot = _yaw(np.radians(rng.uniform(-60.0, 60.0)))
    shift = np.array([rng.uniform(-1.0, 1.0), rng.uniform(-0.2, 0.2), rng.uniform(2.0, 4.0)])
    world = body @ rot.T + shift
    world += joint_noise(rng, world.shape, noise, smoothing)
    return ActionSequence(world, name, source_id)


def generate_dataset(classes: int, per_class: int, seed: int, noise: float = 0.005,
                     topology: SkeletonTopology | None = None, smoothing: float = 2.0) -> LabeledDataset:
    if not 1 <= classes <= len(ACTIONS):
        raise ValidationError(f"classes must lie in [1, {len(ACTIONS)}]")
    if per_class < 1:
        raise ValidationError("per_class must be >= 1")
    topology = topology or default_topology()
    rng = np.random.default_rng(seed)
    names = ACTION_NAMES[:classes]
    seqs = []
    for c, name in enumerate(names):
        for r in range(per_class):
            sid = f"a{c + 1:02d}_s{r % 10 + 1:02d}_e{r // 10 + 1:02d}_skeleton.txt"
            seqs.append(generate_sequence(name, rng, topology, noise, sid, smoothing))
    return LabeledDataset(tuple(seqs), names)


def write_dataset(ds: LabeledDataset, out_dir) -> Path:
    """Write one MSR-layout text file per sequence plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, seq in enumerate(ds):
        name = seq.source_id or f"seq{k:04d}.txt"
        (out / name).write_text(serialize_msr(seq), encoding="utf-8")
        files.append({"path": name, "label": seq.label})
    manifest = {"label_set": list(ds.label_set), "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return out


def concatenate(seqs) -> ActionSequence:
    """Join sequences into one unlabeled stream."""
    return ActionSequence(np.concatenate([s.positions for s in seqs]), None, "stream")
