"""STRC checkpoints.

``"STRC" | version u32 | tensor_count u32`` then per tensor: name length
u16, UTF-8 name, rank u8, rank u32 dims and float64 data, all
little-endian and row-major. Hyperparameters are stored as ``config/``
scalars and the optimizer as ``adam/`` tensors.
"""

import logging
from dataclasses import dataclass, fields
from typing import Dict, Optional

import numpy as np

from constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION

from .errors import FormatError
from .fusion import FusionMode
from .model import LossKind, ModelHyperparams, ModelParams
from .tensor import AdamState
from .utils import ByteReader, write_bytes_atomic

log = logging.getLogger(__name__)

_FUSION_CODES = [m for m in FusionMode]
_LOSS_CODES = [k for k in LossKind]


def _hyper_to_tensors(hyper: ModelHyperparams) -> Dict[str, np.ndarray]:
    out = {}
    for f in fields(hyper):
        value = getattr(hyper, f.name)
        if isinstance(value, FusionMode):
            value = _FUSION_CODES.index(value)
        elif isinstance(value, LossKind):
            value = _LOSS_CODES.index(value)
        out[f"config/{f.name}"] = np.array(float(value))
    return out


def _hyper_from_tensors(tensors: Dict[str, np.ndarray]) -> ModelHyperparams:
    values = {}
    for f in fields(ModelHyperparams):
        key = f"config/{f.name}"
        if key not in tensors:
            raise FormatError("Checkpoint is missing a hyperparameter", expected=key, found=None)
        raw = float(tensors[key])
        if f.name == "fusion":
            values[f.name] = _FUSION_CODES[int(raw)]
        elif f.name == "loss_kind":
            values[f.name] = _LOSS_CODES[int(raw)]
        elif f.name == "variational":
            values[f.name] = bool(raw)
        elif f.name == "gamma":
            values[f.name] = raw
        else:
            values[f.name] = int(raw)
    return ModelHyperparams(**values)


def _adam_to_tensors(state: AdamState) -> Dict[str, np.ndarray]:
    out = {
        "adam/hyper": np.array(
            [state.learning_rate, state.beta1, state.beta2, state.epsilon, float(state.step)]
        )
    }
    for name, m in state.first_moment.items():
        out[f"adam/m/{name}"] = m
    for name, v in state.second_moment.items():
        out[f"adam/v/{name}"] = v
    return out


def _adam_from_tensors(tensors: Dict[str, np.ndarray]) -> Optional[AdamState]:
    if "adam/hyper" not in tensors:
        return None
    lr, b1, b2, eps, step = (float(v) for v in tensors["adam/hyper"])
    state = AdamState(lr, b1, b2, eps, int(step))
    for key, value in tensors.items():
        if key.startswith("adam/m/"):
            state.first_moment[key[len("adam/m/"):]] = value.copy()
        elif key.startswith("adam/v/"):
            state.second_moment[key[len("adam/v/"):]] = value.copy()
    return state


def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    chunks = [CHECKPOINT_MAGIC, np.array([CHECKPOINT_VERSION, len(tensors)], dtype="<u4").tobytes()]
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        value = np.ascontiguousarray(value, dtype="<f8")
        chunks.append(np.array([len(encoded)], dtype="<u2").tobytes())
        chunks.append(encoded)
        chunks.append(np.array([value.ndim], dtype="u1").tobytes())
        chunks.append(np.array(value.shape, dtype="<u4").tobytes())
        chunks.append(value.tobytes())
    return b"".join(chunks)


def decode_tensors(payload: bytes) -> Dict[str, np.ndarray]:
    reader = ByteReader(payload, "STRC checkpoint")
    magic = reader.raw(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError("Not an STRC checkpoint", expected=CHECKPOINT_MAGIC, found=magic)
    version, count = (int(v) for v in reader.take("<u4", 2))
    if version != CHECKPOINT_VERSION:
        raise FormatError("Unsupported STRC version", expected=CHECKPOINT_VERSION, found=version)
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        length = int(reader.take("<u2", 1)[0])
        try:
            name = reader.raw(length).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("Tensor name is not UTF-8") from None
        rank = int(reader.take("u1", 1)[0])
        shape = tuple(int(d) for d in reader.take("<u4", rank))
        size = int(np.prod(shape)) if shape else 1
        tensors[name] = reader.take("<f8", size).reshape(shape).astype(np.float64)
    reader.finish()
    return tensors


@dataclass
class Checkpoint:
    params: ModelParams
    adam: Optional[AdamState] = None


def checkpoint_tensors(params: ModelParams, adam_state: Optional[AdamState] = None) -> Dict[str, np.ndarray]:
    tensors = _hyper_to_tensors(params.hyper)
    tensors.update({name: p.data for name, p in params.named_parameters().items()})
    if adam_state is not None:
        tensors.update(_adam_to_tensors(adam_state))
    return tensors


def save_checkpoint(params: ModelParams, adam_state: Optional[AdamState], path) -> None:
    write_bytes_atomic(path, encode_tensors(checkpoint_tensors(params, adam_state)))
    log.info("Saved checkpoint to %s", path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        tensors = decode_tensors(fh.read())
    hyper = _hyper_from_tensors(tensors)
    params = ModelParams.initialize(hyper)
    for name, param in params.named_parameters().items():
        if name not in tensors:
            raise FormatError("Checkpoint is missing a parameter", expected=name, found=None)
        if tensors[name].shape != param.shape:
            raise FormatError(f"Parameter {name} has the wrong shape", expected=param.shape, found=tensors[name].shape)
        param.data[...] = tensors[name]
    return Checkpoint(params, _adam_from_tensors(tensors))
