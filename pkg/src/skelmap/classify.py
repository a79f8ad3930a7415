"""Second feature map, supervised output layer and the end-to-end pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import growgrid, som
from .config import MapConfig, RunConfig
from .errors import ValidationError
from .pattern import pattern_vector, resample
from .preprocess import PreprocessConfig, fit_preprocess, preprocess_sequence
from .skeleton import ActionSequence, LabeledDataset, SkeletonTopology, default_topology
from .som import Lattice

log = logging.getLogger(__name__)


@dataclass
class OutputLayer:
    """Linear layer mapping second-map activities to one score per label."""

    weights: np.ndarray
    label_set: tuple
    input_scale: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.label_set = tuple(self.label_set)
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.label_set):
            raise ValidationError("output weights must be (labels, neurons)")
        if not np.all(np.isfinite(self.weights)):
            raise ValidationError("output weights must be finite")
        if not (np.isfinite(self.input_scale) and self.input_scale > 0):
            raise ValidationError("input_scale must be positive")

    def scores(self, a: np.ndarray) -> np.ndarray:
        return self.weights @ a


@dataclass(frozen=True)
class Prediction:
    label: str
    confidence: float
    scores: dict


def second_activity(lattice: Lattice, p, sigma: float = 1.0) -> np.ndarray:
    """Flattened activity of the second map for pattern vector ``p``."""
    return som.activity(lattice, p, sigma).ravel()


def output_input(lattice: Lattice, p, sigma: float, mode: str, scale: float = 1.0) -> np.ndarray:
    """Vector fed to the output layer.

    In ``"activity"`` mode the raw activity is divided by a single constant
    fixed at training time (the largest training activity norm). Unfamiliar
    patterns therefore keep their low activity and produce flat scores.
    """
    a = second_activity(lattice, p, sigma)
    if mode == "winner-one-hot":
        one = np.zeros_like(a)
        one[int(np.argmax(a))] = 1.0
        return one
    return a / scale


def train_output(acts, labels, label_set, eta: float = 0.1, epochs: int = 100, seed: int = 0,
                 input_scale: float = 1.0) -> OutputLayer:
    """Delta rule ``W += eta * (target - W a) a^T`` with one-hot targets, shuffled per epoch.

    ``acts`` must already be divided by ``input_scale``; the scale is only
    recorded on the returned layer.
    """
    a = np.asarray(acts, dtype=np.float64)
    label_set = tuple(label_set)
    if a.ndim != 2 or len(a) != len(labels):
        raise ValidationError("need one activity row per label")
    index = {lab: k for k, lab in enumerate(label_set)}
    try:
        y = np.array([index[lab] for lab in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"label {exc.args[0]!r} is not in label_set") from None
    targets = np.eye(len(label_set))[y]
    w = np.zeros((len(label_set), a.shape[1]))
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for k in rng.permutation(len(a)):
            w += eta * np.outer(targets[k] - w @ a[k], a[k])
    return OutputLayer(w, label_set, input_scale)


def softmax(z: np.ndarray, gain: float = 1.0) -> np.ndarray:
    e = np.exp(gain * (z - np.max(z)))
    return e / e.sum()


@dataclass
class PipelineModel:
    config: RunConfig
    topology: SkeletonTopology
    preprocess: PreprocessConfig
    first_kind: str
    first_map: Lattice
    second_kind: str
    second_map: Lattice
    output: OutputLayer
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.second_map.dim != 2 * self.config.k:
            raise ValidationError("second map dim must equal 2K")
        if self.output.weights.shape[1] != self.second_map.n_neurons:
            raise ValidationError("output layer width must equal the second map size")
        if self.first_map.dim != self.preprocess.input_dim:
            raise ValidationError("first map dim does not match the preprocessing output")

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def label_set(self) -> tuple:
        return self.output.label_set

    def inputs(self, seq: ActionSequence) -> np.ndarray:
        return preprocess_sequence(seq, self.preprocess, self.topology)

    def pattern(self, seq: ActionSequence) -> np.ndarray:
        return pattern_vector(self.first_map, self.inputs(seq), self.k)

    def classify_pattern(self, p) -> Prediction:
        cfg = self.config
        a = output_input(self.second_map, p, cfg.second_map.sigma, cfg.output.input,
                         self.output.input_scale)
        z = self.output.scores(a)
        probs = softmax(z, cfg.output.softmax_gain)
        best = int(np.argmax(probs))
        return Prediction(self.label_set[best], float(probs[best]),
                          {lab: float(s) for lab, s in zip(self.label_set, z)})

    def classify_trace(self, points) -> Prediction:
        """Classify a winner trace given in first-map lattice coordinates."""
        return self.classify_pattern(resample(points, self.k, self.first_map.rows, self.first_map.cols))


def train_map(inputs: np.ndarray, cfg: MapConfig, callback=None, callback_every: int = 0) -> tuple:
    """Train one self-organizing layer; returns ``(lattice, info)``."""
    x = np.asarray(inputs, dtype=np.float64)
    if cfg.kind == "som":
        params = cfg.som_params()
        lat = som.train(som.init_lattice(cfg.rows, cfg.cols, x.shape[1], cfg.seed), x, params,
                        callback=callback, callback_every=callback_every)
        info = {"presentations": params.epochs * len(x)}
    else:
        grid = growgrid.fit_grid(x, cfg.gg_params(), callback=callback, callback_every=callback_every)
        lat = grid.lattice
        info = {"presentations": grid.presentations}
    info.update(kind=cfg.kind, rows=lat.rows, cols=lat.cols,
                quantization_error=som.quantization_error(lat, x))
    return lat, info


def train_pipeline(train: LabeledDataset, config: RunConfig | None = None,
                   topology: SkeletonTopology | None = None) -> PipelineModel:
    """Train all layers in order, each on frozen outputs of the previous one."""
    config = config or RunConfig()
    topology = topology or default_topology()
    if any(s.label is None for s in train):
        raise ValidationError("training sequences must be labeled")
    if any(len(s) < 2 for s in train):
        raise ValidationError("training sequences need at least 2 frames")
    labels_present = sorted({s.label for s in train})
    if len(labels_present) < 2:
        raise ValidationError("training needs at least two labels")
    pre = fit_preprocess(train, topology, config.preprocess.attention_joints,
                         config.preprocess.dynamics_order)
    per_seq = [preprocess_sequence(s, pre, topology) for s in train]
    first, first_info = train_map(np.vstack(per_seq), config.first_map)
    log.info("first map %s trained: %s", config.first_map.kind, first_info)
    patterns = np.array([pattern_vector(first, m, config.k) for m in per_seq])
    second, second_info = train_map(patterns, config.second_map)
    log.info("second map %s trained: %s", config.second_map.kind, second_info)
    mode, sigma2 = config.output.input, config.second_map.sigma
    acts = np.array([output_input(second, p, sigma2, mode) for p in patterns])
    scale = 1.0
    if mode == "activity":
        scale = max(float(np.linalg.norm(acts, axis=1).max()), 1e-300)
        acts = acts / scale
    labels = [s.label for s in train]
    out = train_output(acts, labels, train.label_set, config.output.eta, config.output.epochs,
                       config.output.seed, scale)
    train_acc = float(np.mean([train.label_set[int(np.argmax(out.scores(a)))] == lab
                               for a, lab in zip(acts, labels)]))
    report = {"first_map": first_info, "second_map": second_info, "train_accuracy": train_acc,
              "n_train": len(train), "output_epochs": config.output.epochs}
    return PipelineModel(config, topology, pre, config.first_map.kind, first,
                         config.second_map.kind, second, out, report)


def predict(model: PipelineModel, seq: ActionSequence) -> Prediction:
    return model.classify_pattern(model.pattern(seq))


def evaluate(model: PipelineModel, test: LabeledDataset) -> dict:
    """Accuracy, per-class recall and confusion matrices over labeled ``test``."""
    if len(test) == 0:
        raise ValidationError("empty test set")
    labels = model.label_set
    index = {lab: k for k, lab in enumerate(labels)}
    conf = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for seq in test:
        if seq.label not in index:
            raise ValidationError(f"test label {seq.label!r} unknown to the model")
        conf[index[seq.label], index[predict(model, seq).label]] += 1
    totals = conf.sum(axis=1)
    recall = {lab: (float(conf[k, k] / totals[k]) if totals[k] else None) for k, lab in enumerate(labels)}
    norm = np.divide(conf, totals[:, None], out=np.zeros(conf.shape), where=totals[:, None] > 0)
    return {
        "accuracy": float(np.trace(conf) / conf.sum()),
        "n_test": int(conf.sum()),
        "labels": list(labels),
        "per_class": recall,
        "confusion": conf.tolist(),
        "confusion_normalized": norm.tolist(),
    }
