"""Single-file model format.

Layout::

    FTNLAB-MODEL\\n
    <one line of JSON manifest>\\n
    <payload: little-endian float32 arrays, concatenated>

The manifest records the schema version, input shape, layer specs, free-form
metadata and, per array, its name, shape and offset, plus the payload size
and SHA-256 so truncation or corruption is detected before any model is built.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import LayerSpec, Model

MAGIC = b"FTNLAB-MODEL\n"
SCHEMA_VERSION = 1
_DTYPE = np.dtype("<f4")


def save_model(model: Model, path) -> None:
    """Write ``model`` (cast to float32) to ``path``."""
    arrays, chunks, offset = [], [], 0
    for name, value in model.state_dict().items():
        data = np.ascontiguousarray(value, dtype=_DTYPE).tobytes()
        arrays.append({"name": name, "shape": list(value.shape), "offset": offset})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    manifest = {
        "format": "ftnlab-model",
        "schema": SCHEMA_VERSION,
        "input_shape": list(model.input_shape),
        "layers": [s.to_dict() for s in model.specs],
        "meta": model.meta,
        "arrays": arrays,
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    Path(path).write_bytes(MAGIC + text + b"\n" + payload)


def read_manifest(path) -> dict:
    return _split(Path(path).read_bytes())[0]


def _split(blob: bytes):
    if not blob.startswith(MAGIC):
        raise FormatError("not an ftnlab model file (bad magic)")
    rest = blob[len(MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise FormatError("truncated model file: manifest not terminated")
    try:
        manifest = json.loads(rest[:nl])
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt manifest: {exc}") from exc
    version = manifest.get("schema")
    if version != SCHEMA_VERSION:
        raise FormatError(f"unsupported model schema version {version!r} (this build reads {SCHEMA_VERSION})")
    return manifest, rest[nl + 1:]


def load_model(path) -> Model:
    manifest, payload = _split(Path(path).read_bytes())
    if len(payload) != manifest["payload_bytes"]:
        raise FormatError(f"truncated model file: payload {len(payload)} of {manifest['payload_bytes']} bytes")
    if hashlib.sha256(payload).hexdigest() != manifest["sha256"]:
        raise FormatError("model payload checksum mismatch")
    try:
        specs = [LayerSpec.from_dict(d) for d in manifest["layers"]]
        model = Model(specs, manifest["input_shape"], dtype=np.float32, meta=manifest.get("meta"))
        state = {}
        for entry in manifest["arrays"]:
            count = int(np.prod(entry["shape"], dtype=np.int64))
            start = entry["offset"]
            raw = payload[start:start + count * _DTYPE.itemsize]
            state[entry["name"]] = np.frombuffer(raw, dtype=_DTYPE).reshape(entry["shape"])
        model.load_state_dict(state)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model manifest does not match its layers: {exc}") from exc
    return model.eval()
