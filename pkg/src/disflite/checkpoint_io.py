"""Binary checkpoint serialization.

Layout::

    "DFL1" | u64 LE header length | UTF-8 JSON header | pad | payloads

The header carries the format version, config, precision, free-form meta,
and a tensor manifest (name, dtype f32|i8, shape, payload-relative byte
offset; i8 entries add per-row scale/zero_point array offsets).  Every
payload block is 64-byte aligned relative to the payload base, which itself
is the first 64-byte-aligned file offset after the header.  Offsets are
payload-relative so the header content never depends on its own length,
letting file sizes be computed from a config alone.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from .errors import CorruptFile, MissingTensor
from .model import Checkpoint, ModelConfig, tensor_layout
from .quantize import QuantizedTensor, should_quantize

MAGIC = b"DFL1"
FORMAT_VERSION = 1
_ALIGN = 64


def _align(n: int) -> int:
    return (n + _ALIGN - 1) // _ALIGN * _ALIGN


def _manifest_entries(cfg: ModelConfig, precision: str) -> list[dict[str, Any]]:
    """Manifest with payload-relative offsets, in canonical tensor order."""
    entries: list[dict[str, Any]] = []
    offset = 0
    for name, shape in tensor_layout(cfg):
        n = int(np.prod(shape))
        if precision == "i8" and should_quantize(name, shape):
            rows = shape[0]
            e = {"name": name, "dtype": "i8", "shape": list(shape)}
            offset = _align(offset)
            e["offset"] = offset
            offset += n  # int8 payload
            offset = _align(offset)
            e["scale_offset"] = offset
            offset += 4 * rows
            offset = _align(offset)
            e["zero_point_offset"] = offset
            offset += 4 * rows
        else:
            offset = _align(offset)
            e = {"name": name, "dtype": "f32", "shape": list(shape),
                 "offset": offset}
            offset += 4 * n
        entries.append(e)
    return entries


def _header_bytes(cfg: ModelConfig, precision: str, meta: dict[str, Any],
                  entries: list[dict[str, Any]]) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "precision": precision,
        "config": cfg.to_dict(),
        "meta": meta,
        "tensors": entries,
    }
    return json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def serialized_size(cfg: ModelConfig, precision: str = "f32",
                    meta: dict[str, Any] | None = None) -> int:
    """Exact file size in bytes, computed without allocating any tensor."""
    entries = _manifest_entries(cfg, precision)
    header = _header_bytes(cfg, precision, meta or {}, entries)
    payload_base = _align(len(MAGIC) + 8 + len(header))
    last = entries[-1]
    if last["dtype"] == "i8":
        end = last["zero_point_offset"] + 4 * last["shape"][0]
    else:
        end = last["offset"] + 4 * int(np.prod(last["shape"]))
    return payload_base + end


def _write_payloads(f: BinaryIO, ckpt: Checkpoint,
                    entries: list[dict[str, Any]], payload_base: int) -> None:
    def seek_pad(abs_offset: int) -> None:
        here = f.tell()
        if here > abs_offset:
            raise AssertionError("payload layout overlap")
        f.write(b"\x00" * (abs_offset - here))

    for e in entries:
        t = ckpt.tensors[e["name"]]
        if e["dtype"] == "i8":
            assert isinstance(t, QuantizedTensor)
            seek_pad(payload_base + e["offset"])
            f.write(np.ascontiguousarray(t.data, dtype=np.int8).tobytes())
            seek_pad(payload_base + e["scale_offset"])
            f.write(np.ascontiguousarray(t.scale, dtype="<f4").tobytes())
            seek_pad(payload_base + e["zero_point_offset"])
            f.write(np.ascontiguousarray(t.zero_point, dtype="<i4").tobytes())
        else:
            seek_pad(payload_base + e["offset"])
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def save(ckpt: Checkpoint, path: str | Path) -> None:
    """Write a checkpoint; the resulting size equals serialized_size(...)."""
    entries = _manifest_entries(ckpt.config, ckpt.precision)
    names = {e["name"] for e in entries}
    missing = names - set(ckpt.tensors)
    if missing:
        raise MissingTensor(f"checkpoint lacks tensors: {sorted(missing)}")
    header = _header_bytes(ckpt.config, ckpt.precision, ckpt.meta, entries)
    payload_base = _align(len(MAGIC) + 8 + len(header))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        f.write(b"\x00" * (payload_base - len(MAGIC) - 8 - len(header)))
        _write_payloads(f, ckpt, entries, payload_base)


def load(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8 or data[:4] != MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    header_len = int.from_bytes(data[4:12], "little")
    if len(data) < 12 + header_len:
        raise CorruptFile(f"{path}: truncated header")
    try:
        header = json.loads(data[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CorruptFile(
            f"{path}: unsupported format version {header.get('format_version')}")
    cfg = ModelConfig.from_dict(header["config"])
    precision = header["precision"]
    expected = {name: tuple(shape) for name, shape in tensor_layout(cfg)}
    by_name = {e["name"]: e for e in header["tensors"]}
    missing = set(expected) - set(by_name)
    if missing:
        raise MissingTensor(f"{path}: manifest lacks {sorted(missing)}")

    payload_base = _align(12 + header_len)

    def read_array(abs_off: int, dtype, count: int) -> np.ndarray:
        end = abs_off + count * np.dtype(dtype).itemsize
        if end > len(data):
            raise CorruptFile(f"{path}: truncated payload")
        return np.frombuffer(data, dtype=dtype, count=count, offset=abs_off).copy()

    tensors: dict[str, Any] = {}
    for name, shape in expected.items():
        e = by_name[name]
        if tuple(e["shape"]) != shape:
            raise CorruptFile(
                f"{path}: tensor {name} has shape {e['shape']}, config needs {shape}")
        n = int(np.prod(shape))
        if e["dtype"] == "i8":
            rows = shape[0]
            q = read_array(payload_base + e["offset"], np.int8, n).reshape(shape)
            scale = read_array(payload_base + e["scale_offset"], "<f4", rows)
            zp = read_array(payload_base + e["zero_point_offset"], "<i4", rows)
            tensors[name] = QuantizedTensor(data=q, scale=scale, zero_point=zp,
                                            shape=(shape[0], shape[1]))
        elif e["dtype"] == "f32":
            tensors[name] = read_array(
                payload_base + e["offset"], "<f4", n).reshape(shape)
        else:
            raise CorruptFile(f"{path}: unknown dtype {e['dtype']!r}")
    return Checkpoint(config=cfg, tensors=tensors, precision=precision,
                      meta=header.get("meta", {}))


def checkpoint_digest(ckpt: Checkpoint) -> str:
    """SHA-256 over the exact bytes save() would write."""
    entries = _manifest_entries(ckpt.config, ckpt.precision)
    header = _header_bytes(ckpt.config, ckpt.precision, ckpt.meta, entries)
    payload_base = _align(len(MAGIC) + 8 + len(header))

    class _HashSink:
        def __init__(self):
            self.h = hashlib.sha256()
            self.pos = 0

        def write(self, b: bytes):
            self.h.update(b)
            self.pos += len(b)

        def tell(self) -> int:
            return self.pos

    sink = _HashSink()
    sink.write(MAGIC)
    sink.write(len(header).to_bytes(8, "little"))
    sink.write(header)
    sink.write(b"\x00" * (payload_base - len(MAGIC) - 8 - len(header)))
    _write_payloads(sink, ckpt, entries, payload_base)  # type: ignore[arg-type]
    return sink.h.hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
