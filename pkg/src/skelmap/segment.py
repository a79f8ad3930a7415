"""Online recognition over an unsegmented frame stream.

Each incoming frame is preprocessed with the model's frozen statistics and
mapped to its first-map winner. Winners that differ from the previous one
are appended to a window of key activations; once the window holds enough
points it is resampled and classified. A label is emitted after
``consecutive`` agreeing classifications at or above ``theta`` confidence.
Frames that do not add a key activation leave the hysteresis untouched, so
slowing an action down does not change which events are emitted.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .classify import PipelineModel, Prediction
from .config import SegmentSection
from .errors import ValidationError
from .preprocess import attended_positions, dynamics
from .skeleton import PostureFrame


@dataclass(frozen=True)
class RecognitionEvent:
    label: str
    confidence: float
    onset_frame: int
    emit_frame: int

    @property
    def delay(self) -> int:
        return self.emit_frame - self.onset_frame

    def to_dict(self) -> dict:
        return {"label": self.label, "confidence": self.confidence,
                "onset": self.onset_frame, "emit": self.emit_frame}


@dataclass
class StreamState:
    model: PipelineModel
    params: SegmentSection = None
    key_buffer: deque = field(default_factory=deque)
    frame_index: int = 0
    run_label: str | None = None
    run_count: int = 0
    run_onset: int = 0
    last_emitted: str | None = None
    keys_since_emit: int = 0
    last_prediction: Prediction | None = None
    # preprocessing carry-over: recent attended positions and their frame indices
    _pending: deque = field(default_factory=deque)
    _link_dirs: np.ndarray | None = None

    def __post_init__(self):
        if self.params is None:
            self.params = self.model.config.segment
        self._w = np.ascontiguousarray(self.model.first_map.flat)

    @property
    def window(self) -> int:
        return self.params.window

    def push(self, frame, index: int | None = None) -> RecognitionEvent | None:
        """Consume one frame; returns an event when one is emitted."""
        joints = frame.joints if isinstance(frame, PostureFrame) else np.asarray(frame, dtype=np.float64)
        n = self.model.topology.n_joints
        if joints.shape != (n, 3):
            raise ValidationError(f"frame must be ({n}, 3), got {joints.shape}")
        idx = self.frame_index if index is None else int(index)
        self.frame_index = idx + 1
        flat, self._link_dirs = attended_positions(joints[None], self.model.preprocess,
                                                   self.model.topology, self._link_dirs)
        order = self.model.preprocess.dynamics_order
        self._pending.append((idx, flat[0]))
        if len(self._pending) <= order:
            return None
        while len(self._pending) > order + 1:
            self._pending.popleft()
        rows = np.array([p for _, p in self._pending])
        vec = dynamics(rows, order, self.model.preprocess.block_scales)[0]
        return self._consume(vec, self._pending[0][0])

    def flush(self) -> list:
        """Process frames held back for forward differences at the end of a stream."""
        order = self.model.preprocess.dynamics_order
        events = []
        if order == 0 or not self._pending:
            return events
        items = list(self._pending)
        rows = np.array([p for _, p in items])
        if len(rows) < order + 1:
            rows = np.vstack([rows] + [rows[-1:]] * (order + 1 - len(rows)))
        vecs = dynamics(rows, order, self.model.preprocess.block_scales)
        start = 1 if len(items) == order + 1 else 0
        for k in range(start, len(items)):
            ev = self._consume(vecs[k], items[k][0])
            if ev is not None:
                events.append(ev)
        self._pending.clear()
        return events

    def _consume(self, vec: np.ndarray, idx: int) -> RecognitionEvent | None:
        win = int(_kernels.nearest_many(self._w, vec[None])[0])
        point = divmod(win, self.model.first_map.cols)
        if self.key_buffer and self.key_buffer[-1] == point:
            return None
        self.key_buffer.append(point)
        while len(self.key_buffer) > self.params.window:
            self.key_buffer.popleft()
        self.keys_since_emit += 1
        if len(self.key_buffer) < self.params.window_min:
            return None
        pred = self.model.classify_trace(np.array(self.key_buffer, dtype=np.float64))
        self.last_prediction = pred
        if pred.confidence < self.params.theta:
            self.run_label, self.run_count = None, 0
            return None
        if pred.label == self.run_label:
            self.run_count += 1
        else:
            self.run_label, self.run_count, self.run_onset = pred.label, 1, idx
        if self.run_count < self.params.consecutive:
            return None
        onset = self.run_onset
        self.run_label, self.run_count = None, 0
        if pred.label == self.last_emitted and self.keys_since_emit < self.params.window:
            return None
        self.last_emitted, self.keys_since_emit = pred.label, 0
        return RecognitionEvent(pred.label, pred.confidence, onset, idx)

    def reset(self) -> "StreamState":
        self.key_buffer.clear()
        self._pending.clear()
        self._link_dirs = None
        self.run_label, self.run_count, self.run_onset = None, 0, 0
        self.last_emitted, self.keys_since_emit = None, 0
        self.last_prediction = None
        return self


def push_frame(state: StreamState, frame, index: int | None = None):
    """Functional form of ``StreamState.push``: returns ``(state, event_or_None)``."""
    return state, state.push(frame, index)


def reset(state: StreamState) -> StreamState:
    return state.reset()


def segment_stream(model: PipelineModel, positions, params: SegmentSection | None = None) -> list:
    """Run a whole ``(T, N, 3)`` stream through a fresh state; returns all events."""
    state = StreamState(model, params)
    p = positions.positions if hasattr(positions, "positions") else np.asarray(positions)
    events = [ev for ev in (state.push(f) for f in p) if ev is not None]
    return events + state.flush()
