"""Binary model files.

Layout (little-endian)::

    b"ODDL"  uint32 version
    uint32 n  uint32 k  uint32 q  uint32 sparsity  float64 lambda0
    float64[n*k] D (column-major)   float64[q*k] W (column-major)
    uint32 meta_len  utf-8 JSON metadata (class names, provenance)
    uint32 crc32 of every byte after the version field
"""

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, FormatError, VersionError
from .inference import Model

MAGIC = b"ODDL"
VERSION = 1
_HEADER = struct.Struct("<4sI")
_DIMS = struct.Struct("<IIIId")


def model_to_bytes(model):
    n, k, q = model.n_features, model.n_atoms, model.n_classes
    meta = json.dumps({"class_names": list(model.class_names), "metadata": model.metadata},
                      sort_keys=True).encode("utf-8")
    body = b"".join([
        _DIMS.pack(n, k, q, int(model.sparsity), float(model.lambda0)),
        np.asarray(model.D, dtype="<f8").tobytes(order="F"),
        np.asarray(model.W, dtype="<f8").tobytes(order="F"),
        struct.pack("<I", len(meta)),
        meta,
    ])
    return _HEADER.pack(MAGIC, VERSION) + body + struct.pack("<I", zlib.crc32(body))


def model_from_bytes(data):
    if len(data) < _HEADER.size + _DIMS.size + 8:
        raise FormatError(f"model file too short ({len(data)} bytes)", len(data))
    magic, version = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise VersionError(f"unsupported model file version {version} (this build reads {VERSION})", 4)
    body = data[_HEADER.size:-4]
    (stored,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != stored:
        raise ChecksumError("model file checksum mismatch", len(data) - 4)
    n, k, q, sparsity, lambda0 = _DIMS.unpack_from(body, 0)
    pos = _DIMS.size
    need = 8 * (n * k + q * k) + 4
    if len(body) < pos + need:
        raise FormatError(f"payload holds {len(body) - pos} bytes, dims need at least {need}",
                          _HEADER.size + pos)
    D = np.frombuffer(body, dtype="<f8", count=n * k, offset=pos).reshape((n, k), order="F")
    pos += 8 * n * k
    W = np.frombuffer(body, dtype="<f8", count=q * k, offset=pos).reshape((q, k), order="F")
    pos += 8 * q * k
    (meta_len,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if len(body) != pos + meta_len:
        raise FormatError(f"metadata length {meta_len} disagrees with file size", _HEADER.size + pos)
    meta = json.loads(body[pos:].decode("utf-8"))
    return Model(D.astype(np.float64), W.astype(np.float64), lambda0, sparsity,
                 meta.get("class_names", []), meta.get("metadata", {}))


def save_model(model, path):
    """Write atomically (temporary file in the same folder, then rename)."""
    path = Path(path)
    data = model_to_bytes(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return model_from_bytes(path.read_bytes())
