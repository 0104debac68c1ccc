"""Named float32 weight tensors, seeded initialization and the ``.ebw`` format.

File layout::

    b"EBENW001"
    uint32 LE   header length in bytes
    header      UTF-8 JSON list of {"name", "shape", "offset"}; offset counts floats
    payload     float32 LE, tensors back to back in header order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import (
    BadMagicError,
    InvalidParamsError,
    IoFailureError,
    ShapeMismatchOnLoadError,
    TruncatedPayloadError,
    WeightShapeMismatchError,
)
from ..rng import SplitMix64
from .config import NetworkConfig
from .graph import ConvSpec, all_layers, tensor_shapes

MAGIC = b"EBENW001"


class WeightStore:
    """Immutable mapping of tensor name to a read-only float32 array."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        store = {}
        for name, arr in tensors.items():
            a = np.array(arr, dtype=np.float32, order="C")
            if not np.all(np.isfinite(a)):
                raise InvalidParamsError(f"tensor {name} has non-finite values")
            a.flags.writeable = False
            store[name] = a
        self._t = store

    def __getitem__(self, name: str) -> np.ndarray:
        return self._t[name]

    def __contains__(self, name: str) -> bool:
        return name in self._t

    def __iter__(self):
        return iter(self._t)

    def __len__(self) -> int:
        return len(self._t)

    def items(self):
        return self._t.items()

    def names(self) -> list[str]:
        return list(self._t)

    @property
    def total_params(self) -> int:
        return int(sum(a.size for a in self._t.values()))

    @property
    def nbytes(self) -> int:
        return int(sum(a.nbytes for a in self._t.values()))

    def updated(self, mapping: dict[str, np.ndarray]) -> "WeightStore":
        t = dict(self._t)
        t.update(mapping)
        return WeightStore(t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore) or self.names() != other.names():
            return False
        return all(np.array_equal(self[n].view(np.uint32), other[n].view(np.uint32)) for n in self)

    __hash__ = None


def effective_weight(store: WeightStore, spec: ConvSpec) -> np.ndarray:
    """``g * v / ||v||`` per output unit, as float64."""
    v = store[f"{spec.name}.v"].astype(np.float64)
    g = store[f"{spec.name}.g"].astype(np.float64)
    norm = np.sqrt(np.sum(v * v, axis=(1, 2)))
    scale = np.divide(g, norm, out=np.zeros_like(g), where=norm > 0)
    return v * scale[:, None, None]


def check_store(cfg: NetworkConfig, store: WeightStore, prefix: str = "") -> None:
    """Every tensor of the config's graph (optionally one sub-graph) is present with its shape."""
    for name, shape in tensor_shapes(cfg).items():
        if not name.startswith(prefix):
            continue
        if name not in store:
            raise WeightShapeMismatchError(f"missing tensor {name}")
        if store[name].shape != shape:
            raise WeightShapeMismatchError(
                f"tensor {name} has shape {store[name].shape}, graph expects {shape}"
            )


def init_weights(cfg: NetworkConfig, seed: int) -> WeightStore:
    """Seeded uniform(-k, k) init, k = fan_in**-0.5, drawn in graph order.

    For each layer the stream yields v then the bias; g is set to ``||v||``
    per output unit so the effective weight equals v.
    """
    rng = SplitMix64(seed)
    tensors = {}
    for spec in all_layers(cfg):
        bound = spec.fan_in ** -0.5
        shape = spec.v_shape
        v = ((2.0 * rng.uniform(int(np.prod(shape))) - 1.0) * bound).reshape(shape).astype(np.float32)
        b = ((2.0 * rng.uniform(spec.c_out) - 1.0) * bound).astype(np.float32)
        g = np.sqrt(np.sum(v.astype(np.float64) ** 2, axis=(1, 2))).astype(np.float32)
        tensors[f"{spec.name}.v"] = v
        tensors[f"{spec.name}.g"] = g
        tensors[f"{spec.name}.b"] = b
    return WeightStore(tensors)


def save_weights(store: WeightStore, path) -> int:
    """Write ``store``; returns the file size in bytes."""
    header, offset, chunks = [], 0, []
    for name, arr in store.items():
        header.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        chunks.append(arr.astype("<f4").tobytes())
    hbytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    blob = MAGIC + struct.pack("<I", len(hbytes)) + hbytes + b"".join(chunks)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
    return len(blob)


def load_weights(path, cfg: NetworkConfig | None = None) -> WeightStore:
    """Read an ``.ebw`` file; with ``cfg``, shapes are checked against its graph."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc
    if data[:8] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:8]!r}")
    if len(data) < 12:
        raise TruncatedPayloadError(f"{path}: header length missing")
    (hlen,) = struct.unpack_from("<I", data, 8)
    if 12 + hlen > len(data):
        raise TruncatedPayloadError(f"{path}: header truncated")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ShapeMismatchOnLoadError(f"{path}: unreadable header: {exc}") from exc
    payload = data[12 + hlen:]
    if len(payload) % 4:
        raise TruncatedPayloadError(f"{path}: payload is not a whole number of floats")
    floats = np.frombuffer(payload, dtype="<f4")
    expected = None if cfg is None else tensor_shapes(cfg)
    tensors, cursor = {}, 0
    for entry in header:
        try:
            name, shape, offset = entry["name"], tuple(int(s) for s in entry["shape"]), int(entry["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeMismatchOnLoadError(f"{path}: malformed header entry {entry!r}") from exc
        size = int(np.prod(shape)) if shape else 1
        if offset != cursor:
            raise ShapeMismatchOnLoadError(f"{path}: tensor {name} offset {offset}, expected {cursor}")
        if offset + size > floats.size:
            raise TruncatedPayloadError(
                f"{path}: tensor {name} needs floats [{offset}, {offset + size}), payload has {floats.size}"
            )
        if expected is not None and expected.get(name) != shape:
            raise ShapeMismatchOnLoadError(
                f"{path}: tensor {name} has shape {shape}, config expects {expected.get(name)}"
            )
        tensors[name] = floats[offset:offset + size].reshape(shape)
        cursor = offset + size
    if cursor != floats.size:
        raise ShapeMismatchOnLoadError(f"{path}: {floats.size - cursor} trailing floats")
    if expected is not None and set(expected) - set(tensors):
        missing = sorted(set(expected) - set(tensors))
        raise ShapeMismatchOnLoadError(f"{path}: missing tensors {missing[:5]}")
    return WeightStore(tensors)
