"""Model container format.

Layout:

    magic "FFNN" | version u16 | header_len u32 | header JSON (utf-8)
    | per-layer parameter blobs (little-endian float32, row-major,
      each prefixed with its byte length as u32)
    | CRC32 u32 over everything before it

The header carries the input shape, the layer-spec table and an
arbitrary metadata dict (the classifier layer stores its codec there).
The JSON is dumped with sorted keys so equal models serialize to equal
bytes; sha256 over those bytes is the content hash used by the
determinism checks.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import ChecksumError, FormatError
from .layers import PARAM_DTYPE, LayerSpec
from .network import Network

MAGIC = b"FFNN"
VERSION = 1


def network_to_bytes(net: Network, meta: dict | None = None) -> bytes:
    header = {
        "input_shape": list(net.input_shape),
        "layers": [s.to_dict() for s in net.specs],
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    out += struct.pack("<I", len(header_bytes))
    out += header_bytes
    for p in net.params():
        blob = np.ascontiguousarray(p, dtype="<f4").tobytes()
        out += struct.pack("<I", len(blob))
        out += blob
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def network_from_bytes(data: bytes) -> tuple[Network, dict]:
    if len(data) < 14 or data[:4] != MAGIC:
        raise FormatError("not a model file (bad magic bytes)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported model format version {version}")
    if len(data) < 4:
        raise ChecksumError("model file truncated")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ChecksumError("model file failed CRC32 check")
    pos = 6
    (header_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    try:
        header = json.loads(data[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"model header is not valid JSON: {exc}") from exc
    pos += header_len
    specs = [LayerSpec.from_dict(d) for d in header["layers"]]
    net = Network(tuple(header["input_shape"]), specs)
    values = []
    for p in net.params():
        (blob_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        expected = p.size * 4
        if blob_len != expected:
            raise FormatError(f"parameter blob length {blob_len}, expected {expected}")
        arr = np.frombuffer(data[pos:pos + blob_len], dtype="<f4").reshape(p.shape)
        values.append(arr.astype(PARAM_DTYPE))
        pos += blob_len
    if pos != len(data) - 4:
        raise FormatError("trailing bytes after parameter blobs")
    net.set_params(values)
    return net, header.get("meta", {})


def content_hash(net: Network, meta: dict | None = None) -> str:
    return hashlib.sha256(network_to_bytes(net, meta)).hexdigest()


def save_network(net: Network, path: str | Path, meta: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(network_to_bytes(net, meta))
    tmp.replace(path)


def load_network(path: str | Path) -> tuple[Network, dict]:
    return network_from_bytes(Path(path).read_bytes())
