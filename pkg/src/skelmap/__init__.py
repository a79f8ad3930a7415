"""Hierarchical self-organizing maps for skeleton-based action recognition."""

from .classify import PipelineModel, Prediction, evaluate, predict, train_pipeline
from .config import RunConfig, load_config
from .modelfile import load_model, save_model
from .segment import RecognitionEvent, StreamState, segment_stream
from .skeleton import (
    ActionSequence,
    LabeledDataset,
    PostureFrame,
    SkeletonTopology,
    default_topology,
    load_dataset,
    split_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSequence",
    "LabeledDataset",
    "PipelineModel",
    "PostureFrame",
    "Prediction",
    "RecognitionEvent",
    "RunConfig",
    "SkeletonTopology",
    "StreamState",
    "default_topology",
    "evaluate",
    "load_config",
    "load_dataset",
    "load_model",
    "predict",
    "save_model",
    "segment_stream",
    "split_dataset",
    "train_pipeline",
]
