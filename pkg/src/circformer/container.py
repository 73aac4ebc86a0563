"""``FTRW`` binary weight container.

Layout (all integers little-endian)::

    magic      4 bytes  b"FTRW"
    version    u16
    count      u32
    table      count x { name_len u16, name utf-8, kind u8, offset u64, length u64 }
    records    concatenated, in table order

Offsets are absolute. Record payloads by kind:

* ``dense`` (0):       m u32, n u32, m*n f32 row-major
* ``bcm`` (1):         m u32, n u32, b u32, mode u8, pad_rows u32, pad_cols u32,
                       f*g*b f32 in block order p_11, p_12, ..., p_fg
* ``quant-dense`` (2): m u32, n u32, frac_bits u8, m*n i16 row-major
* ``quant-bcm`` (3):   the bcm header, frac_bits u8, f*g*b i16
"""

import os
import struct
import tempfile
from collections import OrderedDict

import numpy as np

from . import bcm
from .bcm import BlockCirculantMatrix
from .errors import ContainerError, ShapeError
from .quant import FixedPointFormat, QuantizedBcm, QuantizedTensor

MAGIC = b"FTRW"
VERSION = 1
KINDS = {"dense": 0, "bcm": 1, "quant-dense": 2, "quant-bcm": 3}
KIND_NAMES = {v: k for k, v in KINDS.items()}

_HEAD = struct.Struct("<4sHI")
_ENTRY = struct.Struct("<BQQ")
_DIMS = struct.Struct("<II")


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to a temp file beside ``path``, then rename."""
    path = os.fspath(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode(obj):
    """Return ``(kind, payload)`` for a dense array, BCM or quantized weight."""
    if isinstance(obj, BlockCirculantMatrix):
        return "bcm", bcm.pack_record(obj)
    if isinstance(obj, QuantizedBcm):
        M = obj
        head = bcm.RECORD_HEADER.pack(M.m, M.n, M.b, int(M.mode), -(-M.m // M.b) * M.b - M.m, -(-M.n // M.b) * M.b - M.n)
        return "quant-bcm", head + bytes([obj.index.frac_bits]) + obj.index.raw.astype("<i2").tobytes()
    if isinstance(obj, QuantizedTensor):
        raw = obj.raw if obj.raw.ndim == 2 else obj.raw.reshape(1, -1)
        return "quant-dense", _DIMS.pack(*raw.shape) + bytes([obj.frac_bits]) + raw.astype("<i2").tobytes()
    a = np.asarray(obj, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"dense records must be rank 1 or 2, got rank {a.ndim}")
    return "dense", _DIMS.pack(*a.shape) + a.astype("<f4").tobytes()


def decode(kind, payload):
    try:
        if kind == "dense":
            m, n = _DIMS.unpack_from(payload)
            _expect(payload, _DIMS.size + 4 * m * n)
            return np.frombuffer(payload, "<f4", m * n, _DIMS.size).astype(np.float64).reshape(m, n)
        if kind == "bcm":
            return bcm.unpack_record(payload)
        if kind == "quant-dense":
            m, n = _DIMS.unpack_from(payload)
            frac = payload[_DIMS.size]
            _expect(payload, _DIMS.size + 1 + 2 * m * n)
            raw = np.frombuffer(payload, "<i2", m * n, _DIMS.size + 1).astype(np.int16).reshape(m, n)
            return QuantizedTensor(raw, FixedPointFormat(frac))
        if kind == "quant-bcm":
            m, n, b, mode = bcm.unpack_header(payload)
            f, g = -(-m // b), -(-n // b)
            off = bcm.RECORD_HEADER.size
            frac = payload[off]
            _expect(payload, off + 1 + 2 * f * g * b)
            raw = np.frombuffer(payload, "<i2", f * g * b, off + 1).astype(np.int16).reshape(f, g, b)
            return QuantizedBcm(m, n, b, mode, QuantizedTensor(raw, FixedPointFormat(frac)))
    except (struct.error, IndexError, ValueError) as exc:
        raise ContainerError(f"malformed {kind} record: {exc}") from exc
    raise ContainerError(f"unknown record kind {kind!r}")


def _expect(payload, size):
    if len(payload) != size:
        raise ContainerError(f"record is {len(payload)} bytes, expected {size}")


class WeightContainer:
    """Ordered collection of named records, kept as raw payload bytes."""

    def __init__(self):
        self._records = OrderedDict()  # name -> (kind, payload)
        self.path = None
        self._offsets = {}

    def __contains__(self, name):
        return name in self._records

    def __len__(self):
        return len(self._records)

    def names(self):
        return list(self._records)

    def kind(self, name) -> str:
        return self._record(name)[0]

    def payload(self, name) -> bytes:
        return self._record(name)[1]

    def _record(self, name):
        try:
            return self._records[name]
        except KeyError:
            raise ContainerError(f"no record named {name!r}") from None

    def put(self, name, obj):
        self._records[name] = encode(obj)
        self._offsets.pop(name, None)

    def put_raw(self, name, kind, payload):
        if kind not in KINDS:
            raise ContainerError(f"unknown record kind {kind!r}")
        self._records[name] = (kind, bytes(payload))
        self._offsets.pop(name, None)

    def get(self, name):
        return decode(*self._record(name))

    def remove(self, name):
        self._record(name)
        del self._records[name]

    def to_bytes(self) -> bytes:
        names = [n.encode("utf-8") for n in self._records]
        table_size = sum(2 + len(n) + _ENTRY.size for n in names)
        offset = _HEAD.size + table_size
        table = bytearray()
        for raw_name, (kind, payload) in zip(names, self._records.values()):
            table += struct.pack("<H", len(raw_name)) + raw_name
            table += _ENTRY.pack(KINDS[kind], offset, len(payload))
            offset += len(payload)
        body = b"".join(p for _, p in self._records.values())
        return _HEAD.pack(MAGIC, VERSION, len(names)) + bytes(table) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightContainer":
        data = bytes(data)
        try:
            magic, version, count = _HEAD.unpack_from(data)
        except struct.error:
            raise ContainerError("file too short for a weight container header") from None
        if magic != MAGIC:
            raise ContainerError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise ContainerError(f"unsupported container version {version}")
        pos = _HEAD.size
        entries = []
        try:
            for _ in range(count):
                (nlen,) = struct.unpack_from("<H", data, pos)
                pos += 2
                name = data[pos : pos + nlen].decode("utf-8")
                pos += nlen
                kind, offset, length = _ENTRY.unpack_from(data, pos)
                pos += _ENTRY.size
                entries.append((name, kind, offset, length))
        except (struct.error, UnicodeDecodeError) as exc:
            raise ContainerError(f"corrupt record table: {exc}") from None
        spans = sorted((off, off + ln, name) for name, _, off, ln in entries)
        prev_end = pos
        for start, end, name in spans:
            if start < prev_end or end > len(data):
                raise ContainerError(f"record {name!r} overlaps another record or runs past the end")
            prev_end = end
        out = cls()
        for name, kind, offset, length in entries:
            if name in out._records:
                raise ContainerError(f"duplicate record name {name!r}")
            if kind not in KIND_NAMES:
                raise ContainerError(f"record {name!r} has unknown kind {kind}")
            out._records[name] = (KIND_NAMES[kind], data[offset : offset + length])
            out._offsets[name] = offset
        return out

    @classmethod
    def read(cls, path) -> "WeightContainer":
        with open(path, "rb") as fh:
            out = cls.from_bytes(fh.read())
        out.path = os.fspath(path)
        return out

    def write(self, path):
        atomic_write(path, self.to_bytes())

    def dense_view(self, name) -> np.ndarray:
        """Read-only memory map of a dense record in the file this was read from.

        Rows are fetched from disk only when indexed, which is how the
        embedding table is served.
        """
        kind, payload = self._record(name)
        if kind != "dense":
            raise ContainerError(f"record {name!r} is {kind}, not dense")
        if self.path is None or name not in self._offsets:
            return self.get(name)
        m, n = _DIMS.unpack_from(payload)
        return np.memmap(self.path, dtype="<f4", mode="r", offset=self._offsets[name] + _DIMS.size, shape=(m, n))
