"""Flat binary checkpoint layout (all integers little-endian).

    magic        8 bytes   b"T2ICKPT1"
    meta_len     uint32    length of the metadata block
    meta         utf-8 JSON, keys sorted: spec, image_shape, config
    n_arrays     uint32
    per array:
        name_len uint16, name utf-8
        dtype    uint8     1 = float32, 2 = float64
        ndim     uint8
        dims     uint32 * ndim
    then every array's data, row-major, in header order
"""
import json
import struct
from dataclasses import asdict

import numpy as np

from .network import NetworkSpec, TrainedModel

MAGIC = b"T2ICKPT1"
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


def save(model: TrainedModel, path) -> None:
    spec = asdict(model.spec)
    if spec["filters"] is not None:
        spec["filters"] = list(spec["filters"])
    config = model.config.as_dict() if hasattr(model.config, "as_dict") else None
    meta = json.dumps({"spec": spec, "image_shape": list(model.image_shape), "config": config},
                      sort_keys=True).encode()
    head = [MAGIC, struct.pack("<I", len(meta)), meta, struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        raw = name.encode()
        head.append(struct.pack("<H", len(raw)) + raw)
        head.append(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
        head.append(struct.pack("<%dI" % arr.ndim, *arr.shape))
    with open(path, "wb") as fh:
        fh.write(b"".join(head))
        for arr in model.params.values():
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load(path) -> TrainedModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    pos = 8
    (meta_len,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    meta = json.loads(buf[pos:pos + meta_len].decode())
    pos += meta_len
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    entries = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + name_len].decode()
        pos += name_len
        code, ndim = struct.unpack_from("<BB", buf, pos)
        pos += 2
        dims = struct.unpack_from("<%dI" % ndim, buf, pos)
        pos += 4 * ndim
        entries.append((name, _DTYPES[code], dims))
    params = {}
    for name, dtype, dims in entries:
        n = int(np.prod(dims)) if dims else 1
        params[name] = np.frombuffer(buf, dtype=dtype, count=n, offset=pos).reshape(dims).astype(
            dtype.newbyteorder("="))
        pos += n * dtype.itemsize
    spec = meta["spec"]
    if spec.get("filters") is not None:
        spec["filters"] = tuple(spec["filters"])
    return TrainedModel(spec=NetworkSpec(**spec), image_shape=tuple(meta["image_shape"]),
                        params=params)
