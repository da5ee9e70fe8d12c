"""Self-describing binary container for named float/int arrays plus JSON metadata.

Layout: ``b"JETCAST1"``, an 8-byte little-endian header length, a UTF-8 JSON
header (sorted keys) and the raw little-endian array buffers.  The header
records every array's dtype, shape and offset and a SHA-256 of the payload.
The same inputs always produce the same bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import LoadError

MAGIC = b"JETCAST1"
_DTYPES = {"f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


def _dtype_code(arr: np.ndarray) -> str:
    if arr.dtype.kind == "f":
        return "f8"
    if arr.dtype.kind in "iu":
        return "i8"
    raise TypeError(f"unsupported dtype {arr.dtype}")


def dumps(meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    index, chunks, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        code = _dtype_code(arr)
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        index.append({"name": name, "dtype": code, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {"meta": meta, "arrays": index, "sha256": hashlib.sha256(payload).hexdigest()}
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(head)) + head + payload


def loads(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        if blob[:8] != MAGIC:
            raise LoadError("not a jetcast container (bad magic)")
        (n,) = struct.unpack("<Q", blob[8:16])
        header = json.loads(blob[16:16 + n].decode("utf-8"))
        payload = blob[16 + n:]
        if hashlib.sha256(payload).hexdigest() != header["sha256"]:
            raise LoadError("container payload checksum mismatch")
        arrays = {}
        for item in header["arrays"]:
            raw = payload[item["offset"]:item["offset"] + item["nbytes"]]
            arr = np.frombuffer(raw, dtype=_DTYPES[item["dtype"]]).reshape(item["shape"]).copy()
            arrays[item["name"]] = arr
        return header["meta"], arrays
    except LoadError:
        raise
    except (ValueError, KeyError, TypeError, struct.error, UnicodeDecodeError) as exc:
        raise LoadError(f"corrupted container: {exc}") from None


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, dumps(meta, arrays))


def load(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from None
    return loads(blob)


def save_network(path, net) -> None:
    save(path, {"kind": "network", "network": net.spec()}, {f"p{i:03d}": p for i, p in enumerate(net.params)})


def load_network(path):
    from .nn import Network

    meta, arrays = load(path)
    if meta.get("kind") != "network":
        raise LoadError(f"{path} does not hold a network")
    try:
        return Network.from_spec(meta["network"], [arrays[k] for k in sorted(arrays)])
    except (KeyError, ValueError) as exc:
        raise LoadError(f"bad network container: {exc}") from None
