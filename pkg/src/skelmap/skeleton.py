"""Skeleton data model, file formats and dataset splitting.

Joint positions are stored as float64 arrays: a frame is ``(N, 3)`` and a
sequence is ``(T, N, 3)``, in meters.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    MalformedFile,
    ParseError,
    StreamError,
    ValidationError,
)

REQUIRED_JOINTS = ("Stomach", "LeftHip", "RightHip")


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint names and the parent of each joint (``-1`` for the root)."""

    joint_names: tuple
    parent: tuple
    name: str = "custom"

    def __post_init__(self):
        names, parent = tuple(self.joint_names), tuple(int(p) for p in self.parent)
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "parent", parent)
        n = len(names)
        if n == 0 or len(parent) != n:
            raise ValidationError("topology needs one parent entry per joint")
        if len(set(names)) != n:
            raise ValidationError("duplicate joint names in topology")
        roots = [i for i, p in enumerate(parent) if p < 0]
        if len(roots) != 1:
            raise ValidationError(f"topology must have exactly one root, found {len(roots)}")
        for i, p in enumerate(parent):
            if p >= n or p == i:
                raise ValidationError(f"joint {names[i]} has invalid parent {p}")
        # every joint must reach the root without revisiting a joint
        for i in range(n):
            seen, j = set(), i
            while parent[j] >= 0:
                if j in seen:
                    raise ValidationError("parent graph contains a cycle")
                seen.add(j)
                j = parent[j]
        for req in REQUIRED_JOINTS:
            if req not in names:
                raise ValidationError(f"topology lacks required joint {req!r}")

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def root(self) -> int:
        return self.parent.index(-1)

    @property
    def links(self) -> tuple:
        """(parent, child) pairs in breadth-first order from the root."""
        children = {i: [] for i in range(self.n_joints)}
        for c, p in enumerate(self.parent):
            if p >= 0:
                children[p].append(c)
        order, queue = [], [self.root]
        while queue:
            p = queue.pop(0)
            for c in children[p]:
                order.append((p, c))
                queue.append(c)
        return tuple(order)

    def index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown joint {name!r}") from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": [
                [n, self.joint_names[p] if p >= 0 else None]
                for n, p in zip(self.joint_names, self.parent)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonTopology":
        names = [j[0] for j in d["joints"]]
        parent = [names.index(j[1]) if j[1] is not None else -1 for j in d["joints"]]
        return cls(tuple(names), tuple(parent), d.get("name", "custom"))


def default_topology() -> SkeletonTopology:
    """The 20-joint Kinect v1 tree rooted at the Stomach (hip center)."""
    text = resources.files("skelmap.data").joinpath("kinect20.json").read_text()
    return SkeletonTopology.from_dict(json.loads(text))


def load_topology(path) -> SkeletonTopology:
    return SkeletonTopology.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class PostureFrame:
    joints: np.ndarray

    def __post_init__(self):
        j = _frozen(self.joints)
        if j.ndim != 2 or j.shape[1] != 3:
            raise ValidationError(f"frame must be (N, 3), got {j.shape}")
        if not np.all(np.isfinite(j)):
            raise ValidationError("frame contains non-finite coordinates")
        object.__setattr__(self, "joints", j)


@dataclass(frozen=True, eq=False)
class ActionSequence:
    """Ordered posture frames, stored as a ``(T, N, 3)`` array."""

    positions: np.ndarray
    label: str | None = None
    source_id: str = ""

    def __post_init__(self):
        p = _frozen(self.positions)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValidationError(f"sequence must be (T, N, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("sequence contains non-finite coordinates")
        object.__setattr__(self, "positions", p)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def frames(self) -> list:
        return [PostureFrame(p) for p in self.positions]

    @classmethod
    def from_frames(cls, frames: Sequence[PostureFrame], label=None, source_id=""):
        if not frames:
            raise ValidationError("no frames")
        return cls(np.stack([f.joints for f in frames]), label, source_id)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    sequences: tuple
    label_set: tuple = field(default=())

    def __post_init__(self):
        seqs = tuple(self.sequences)
        labels = tuple(self.label_set) or tuple(
            sorted({s.label for s in seqs if s.label is not None})
        )
        for s in seqs:
            if s.label is not None and s.label not in labels:
                raise ValidationError(f"label {s.label!r} not in label_set")
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "label_set", labels)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def labels(self) -> list:
        return [s.label for s in self.sequences]


# --------------------------------------------------------------------------
# MSR-Action3D text format


@dataclass(frozen=True)
class FrameLayout:
    """Row layout of an MSR skeleton file.

    Joint ``j`` of a frame is read from row ``offset + j * stride`` of that
    frame's block of ``rows_per_frame`` rows; the first three columns are
    x, y, z and any remaining column (the confidence) is ignored.
    """

    rows_per_frame: int = 20
    columns: int = 4
    offset: int = 0
    stride: int = 1

    @classmethod
    def real_and_screen(cls) -> "FrameLayout":
        """40 rows per frame, screen row followed by real-world row per joint."""
        return cls(rows_per_frame=40, columns=4, offset=1, stride=2)


def _lines(text) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_msr_skeleton(text, topology: SkeletonTopology, layout: FrameLayout = FrameLayout(),
                       label=None, source_id="") -> ActionSequence:
    rows = []
    for lineno, line in enumerate(_lines(text), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != layout.columns:
            raise ParseError(f"expected {layout.columns} columns, got {len(tokens)}", lineno)
        try:
            rows.append([float(t) for t in tokens[:3]])
        except ValueError:
            raise ParseError(f"non-numeric token in {line.strip()!r}", lineno) from None
    if not rows:
        raise MalformedFile("no skeleton rows")
    if len(rows) % layout.rows_per_frame:
        raise MalformedFile(
            f"{len(rows)} rows is not a multiple of {layout.rows_per_frame} rows per frame"
        )
    n = topology.n_joints
    last = layout.offset + (n - 1) * layout.stride
    if last >= layout.rows_per_frame:
        raise MalformedFile(f"layout cannot hold {n} joints")
    data = np.asarray(rows).reshape(-1, layout.rows_per_frame, 3)
    pick = layout.offset + layout.stride * np.arange(n)
    return ActionSequence(data[:, pick, :], label, source_id)


def serialize_msr(seq: ActionSequence) -> str:
    """Write ``seq`` in the default 20x4 layout with unit confidence."""
    out = io.StringIO()
    for frame in seq.positions.tolist():
        for x, y, z in frame:
            out.write(f"{x!r} {y!r} {z!r} 1\n")
    return out.getvalue()


# --------------------------------------------------------------------------
# JSON-lines frame stream


@dataclass(frozen=True)
class FrameRecord:
    """One stream record: frame index, timestamp in seconds and the frame."""

    index: int
    time: float
    frame: PostureFrame


def parse_jsonl_stream(lines, n_joints: int) -> Iterator[FrameRecord]:
    """Yield frames from ``{"i": int, "t": float, "j": [3N floats]}`` lines."""
    prev = None
    for lineno, line in enumerate(_lines(lines), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            idx, t, flat = int(rec["i"]), float(rec["t"]), rec["j"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad record: {exc}", lineno) from None
        if not isinstance(flat, list) or len(flat) != 3 * n_joints:
            got = len(flat) if isinstance(flat, list) else type(flat).__name__
            raise ParseError(f"expected {3 * n_joints} coordinates, got {got}", lineno)
        if prev is not None and idx <= prev:
            raise StreamError(f"line {lineno}: frame index {idx} after {prev}")
        prev = idx
        try:
            frame = PostureFrame(np.asarray(flat, dtype=np.float64).reshape(n_joints, 3))
        except (ValueError, TypeError) as exc:
            raise ParseError(str(exc), lineno) from None
        yield FrameRecord(idx, t, frame)


def format_jsonl_frame(index: int, time: float, frame) -> str:
    joints = frame.joints if isinstance(frame, PostureFrame) else np.asarray(frame)
    return json.dumps({"i": int(index), "t": float(time), "j": joints.ravel().tolist()})


def write_jsonl_stream(seq: ActionSequence, fps: float = 30.0, start: int = 0) -> str:
    return "".join(
        format_jsonl_frame(start + k, (start + k) / fps, f) + "\n"
        for k, f in enumerate(seq.positions)
    )


# --------------------------------------------------------------------------
# datasets on disk

MSR_NAME = re.compile(r"a(\d+)_s(\d+)_e(\d+)")


def _read_sequence(path: Path, topology, layout, label) -> ActionSequence:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        frames = [r.frame for r in parse_jsonl_stream(text, topology.n_joints)]
        if not frames:
            raise MalformedFile(f"{path}: empty stream")
        return ActionSequence.from_frames(frames, label, path.name)
    return parse_msr_skeleton(text, topology, layout, label, path.name)


def load_dataset(root, topology: SkeletonTopology | None = None,
                 layout: FrameLayout = FrameLayout()) -> LabeledDataset:
    """Load every sequence under ``root``.

    With a ``manifest.json`` (``{"label_set": [...], "files": [{"path", "label"}]}``)
    labels come from the manifest; otherwise ``*.txt`` files named in the
    MSR-Action3D style ``aXX_sYY_eZZ`` are labeled ``aXX``.
    """
    root = Path(root)
    topology = topology or default_topology()
    manifest = root / "manifest.json"
    if manifest.exists():
        m = json.loads(manifest.read_text())
        entries = [(root / e["path"], e.get("label")) for e in m["files"]]
        label_set = tuple(m.get("label_set", ()))
    else:
        entries = []
        for p in sorted(root.glob("*.txt")):
            match = MSR_NAME.search(p.name)
            entries.append((p, f"a{int(match.group(1)):02d}" if match else None))
        label_set = ()
    if not entries:
        raise MalformedFile(f"no sequences found in {root}")
    seqs = [_read_sequence(p, topology, layout, lab) for p, lab in entries]
    return LabeledDataset(tuple(seqs), label_set)


def dataset_hash(root) -> str:
    """SHA-256 over the relative names and bytes of all files under ``root``."""
    h = hashlib.sha256()
    root = Path(root)
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# splitting


def split_dataset(ds: LabeledDataset, train_fraction: float, seed: int):
    """Stratified, seeded train/test split.

    Each label's sequences are shuffled and ``round(n * train_fraction)`` go to
    training, keeping at least one test item for labels with two or more
    sequences unless ``train_fraction`` is exactly 1.
    """
    if not 0.0 <= train_fraction <= 1.0:
        raise ValidationError("train_fraction must lie in [0, 1]")
    groups: dict = {}
    for k, s in enumerate(ds.sequences):
        if s.label is None:
            raise ValidationError(f"sequence {s.source_id or k} is unlabeled")
        groups.setdefault(s.label, []).append(k)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in ds.label_set:
        members = groups.get(label, [])
        n = len(members)
        if n == 0:
            continue
        n_train = int(math.floor(n * train_fraction + 0.5))
        if train_fraction < 1.0 and n >= 2:
            n_train = min(n_train, n - 1)
        order = rng.permutation(n)
        train_idx += [members[i] for i in order[:n_train]]
        test_idx += [members[i] for i in order[n_train:]]
    pick = lambda idx: LabeledDataset(tuple(ds.sequences[i] for i in sorted(idx)), ds.label_set)
    return pick(train_idx), pick(test_idx)


def link_lengths(positions: np.ndarray, topology: SkeletonTopology) -> np.ndarray:
    """Per-frame link lengths, shape ``(T, n_links)`` (or ``(n_links,)`` for one frame)."""
    p = np.asarray(positions, dtype=np.float64)
    links = np.asarray(topology.links)
    d = p[..., links[:, 1], :] - p[..., links[:, 0], :]
    return np.linalg.norm(d, axis=-1)


__all__ = [
    "ActionSequence",
    "FrameLayout",
    "FrameRecord",
    "LabeledDataset",
    "PostureFrame",
    "SkeletonTopology",
    "dataset_hash",
    "default_topology",
    "format_jsonl_frame",
    "link_lengths",
    "load_dataset",
    "load_topology",
    "parse_jsonl_stream",
    "parse_msr_skeleton",
    "serialize_msr",
    "split_dataset",
    "write_jsonl_stream",
]
