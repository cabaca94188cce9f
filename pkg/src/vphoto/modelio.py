"""Binary container for trained model parameters.

Layout, all little-endian:

    magic             4 bytes  b"CRTM"
    format version    u32
    extractor version u32
    activation code   u32      (0 = tanh hidden layers, sigmoid output)
    array count       u32
    per array:        ndim u32, dims u32 * ndim, float64 data row-major

A JSON sidecar `<file>.json` carries non-numeric metadata (kind, training
seed, dataset hash, config).  Parameters round-trip exactly: float64 in,
float64 out.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CRTM"
FORMAT_VERSION = 1

ACTIVATION_CODES = {"tanh": 0}
ACTIVATION_NAMES = {code: name for name, code in ACTIVATION_CODES.items()}


class ModelFormatError(ValueError):
    """File is not a valid model container."""


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_arrays(
    path,
    arrays: list[np.ndarray],
    extractor_version: int,
    activation: str = "tanh",
    metadata: dict | None = None,
) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            struct.pack(
                "<4I",
                FORMAT_VERSION,
                extractor_version,
                ACTIVATION_CODES[activation],
                len(arrays),
            )
        )
        for arr in arrays:
            a = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
            fh.write(a.tobytes())
    if metadata is not None:
        sidecar_path(path).write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")


def load_arrays(path) -> tuple[list[np.ndarray], int, str]:
    """Returns (arrays, extractor_version, activation)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic, not a model file")
    fmt, extractor, act_code, count = struct.unpack_from("<4I", data, 4)
    if fmt != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {fmt}")
    if act_code not in ACTIVATION_NAMES:
        raise ModelFormatError(f"{path}: unknown activation code {act_code}")
    offset = 4 + 16
    arrays: list[np.ndarray] = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(shape)
        arrays.append(arr.astype(np.float64))
        offset += 8 * n
    if offset != len(data):
        raise ModelFormatError(f"{path}: trailing bytes after parameter data")
    return arrays, extractor, ACTIVATION_NAMES[act_code]


def load_metadata(path) -> dict:
    sp = sidecar_path(path)
    if not sp.exists():
        return {}
    return json.loads(sp.read_text())
