"""Binary model files.

Layout (all integers little-endian)::

    b"SKELMAP\\0"              magic, 8 bytes
    uint16 version             FORMAT_VERSION
    uint32 header_len
    header                     UTF-8 JSON, sorted keys, no whitespace
    first map lattice          Lattice.to_bytes()
    second map lattice         Lattice.to_bytes()
    output weights             <f8, shape (labels, neurons), row-major
    sha256 digest              of every preceding byte, 32 bytes

Floats in the header are written with ``repr`` precision, so a load/save
round trip reproduces the model bit for bit. See ``docs/model-file.md``.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .classify import OutputLayer, PipelineModel
from .config import RunConfig
from .errors import ModelFormatError, SkelmapError
from .preprocess import PreprocessConfig
from .skeleton import SkeletonTopology
from .som import Lattice

MAGIC = b"SKELMAP\0"
FORMAT_VERSION = 1
_DIGEST = 32


def _header(model: PipelineModel, metadata: dict | None) -> dict:
    return {
        "config": model.config.to_dict(),
        "topology": model.topology.to_dict(),
        "preprocess": model.preprocess.to_dict(),
        "first_kind": model.first_kind,
        "second_kind": model.second_kind,
        "k": model.k,
        "label_set": list(model.label_set),
        "output_shape": list(model.output.weights.shape),
        "output_input_scale": model.output.input_scale,
        "report": model.report,
        "metadata": metadata or {},
    }


def dumps(model: PipelineModel, metadata: dict | None = None) -> bytes:
    """Serialize ``model``; ``metadata`` (seeds, dataset hash, ...) goes in the header."""
    header = json.dumps(_header(model, metadata), sort_keys=True, separators=(",", ":"),
                        allow_nan=False).encode("utf-8")
    body = b"".join([
        MAGIC,
        struct.pack("<HI", FORMAT_VERSION, len(header)),
        header,
        model.first_map.to_bytes(),
        model.second_map.to_bytes(),
        model.output.weights.astype("<f8").tobytes(),
    ])
    return body + hashlib.sha256(body).digest()


def loads(data: bytes) -> tuple:
    """Decode a model file; returns ``(model, metadata)``."""
    if len(data) < len(MAGIC) + 6 + _DIGEST or data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a skelmap model file")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ModelFormatError("checksum mismatch: file is corrupt or truncated")
    version, hlen = struct.unpack_from("<HI", body, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    offset = len(MAGIC) + 6
    try:
        header = json.loads(body[offset:offset + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"bad header: {exc}") from None
    offset += hlen
    first, offset = Lattice.from_bytes(body, offset)
    second, offset = Lattice.from_bytes(body, offset)
    try:
        rows, cols = header["output_shape"]
        if len(body) != offset + 8 * rows * cols:
            raise ModelFormatError("output weights have the wrong size")
        w = np.frombuffer(body, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
        config = RunConfig.from_dict(header["config"])
        if config.k != header["k"]:
            raise ModelFormatError("K in header disagrees with the stored config")
        model = PipelineModel(
            config,
            SkeletonTopology.from_dict(header["topology"]),
            PreprocessConfig.from_dict(header["preprocess"]),
            header["first_kind"], first,
            header["second_kind"], second,
            OutputLayer(w.astype(np.float64), tuple(header["label_set"]), header["output_input_scale"]),
            header["report"],
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, SkelmapError) as exc:
        raise ModelFormatError(f"inconsistent model file: {exc}") from None
    if max(model.preprocess.attention_joints) >= model.topology.n_joints:
        raise ModelFormatError("attention joint index outside the topology")
    if len(model.preprocess.standard_link_lengths) != len(model.topology.links):
        raise ModelFormatError("one standard length per link is required")
    return model, header["metadata"]


def save_model(model: PipelineModel, path, metadata: dict | None = None) -> Path:
    """Write atomically: a temporary file in the target directory is renamed into place."""
    path = Path(path)
    data = dumps(model, metadata)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def load_model(path) -> tuple:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from None
    return loads(data)
