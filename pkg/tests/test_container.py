import struct

import numpy as np
import pytest

from circformer import bcm
from circformer.container import MAGIC, WeightContainer, decode, encode
from circformer.errors import ContainerError, ShapeError
from circformer.quant import FixedPointFormat, QuantizedBcm, QuantizedTensor, quantize, quantize_bcm


def sample():
    rng = np.random.default_rng(0)
    c = WeightContainer()
    c.put("dense", rng.normal(size=(3, 5)))
    c.put("vec", rng.normal(size=4))
    c.put("bcm", bcm.random_bcm(6, 10, 4, rng))
    c.put("qdense", quantize(rng.normal(size=(2, 3)), FixedPointFormat(12)))
    c.put("qbcm", quantize_bcm(bcm.random_bcm(8, 8, 4, rng)))
    c.put("ünï", np.zeros((1, 1)))
    return c


def test_header_layout():
    c = WeightContainer()
    c.put("w", np.array([[1.0, 2.0]]))
    data = c.to_bytes()
    assert data[:4] == MAGIC
    assert struct.unpack_from("<HI", data, 4) == (1, 1)
    name_len = struct.unpack_from("<H", data, 10)[0]
    assert data[12 : 12 + name_len] == b"w"
    kind, offset, length = struct.unpack_from("<BQQ", data, 12 + name_len)
    assert (kind, length) == (0, 16)
    assert struct.unpack_from("<II2f", data, offset) == (1, 2, 1.0, 2.0)


def test_roundtrip_every_kind(tmp_path):
    c = sample()
    path = tmp_path / "w.ftrw"
    c.write(path)
    back = WeightContainer.read(path)
    assert back.names() == c.names()
    assert [back.kind(n) for n in back.names()] == ["dense", "dense", "bcm", "quant-dense", "quant-bcm", "dense"]
    back.write(tmp_path / "again.ftrw")
    assert (tmp_path / "again.ftrw").read_bytes() == path.read_bytes()
    for name in c.names():
        assert encode(back.get(name)) == (c.kind(name), c.payload(name))


def test_decoded_values():
    c = sample()
    assert isinstance(c.get("bcm"), bcm.BlockCirculantMatrix)
    assert isinstance(c.get("qbcm"), QuantizedBcm)
    q = c.get("qdense")
    assert isinstance(q, QuantizedTensor) and q.frac_bits == 12
    assert c.get("vec").shape == (1, 4)


def test_memmap_view(tmp_path):
    c = sample()
    path = tmp_path / "w.ftrw"
    c.write(path)
    back = WeightContainer.read(path)
    view = back.dense_view("dense")
    assert isinstance(view, np.memmap)
    np.testing.assert_array_equal(view, back.get("dense"))
    with pytest.raises(ContainerError):
        back.dense_view("bcm")
    np.testing.assert_array_equal(c.dense_view("dense"), c.get("dense"))


def test_corrupt_files():
    data = sample().to_bytes()
    with pytest.raises(ContainerError, match="magic"):
        WeightContainer.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ContainerError, match="version"):
        WeightContainer.from_bytes(data[:4] + struct.pack("<H", 9) + data[6:])
    with pytest.raises(ContainerError):
        WeightContainer.from_bytes(data[:3])
    with pytest.raises(ContainerError):
        WeightContainer.from_bytes(data[:-1])
    with pytest.raises(ContainerError):
        WeightContainer.from_bytes(data[:20])


def test_overlapping_and_duplicate_records():
    c = WeightContainer()
    c.put("a", np.zeros((1, 1)))
    c.put("b", np.zeros((1, 1)))
    data = bytearray(c.to_bytes())
    # point b at a's payload
    off_a = 10 + 2 + 1 + 1
    a_offset = struct.unpack_from("<Q", data, off_a)[0]
    struct.pack_into("<Q", data, 10 + 2 + 1 + 17 + 2 + 1 + 1, a_offset)
    with pytest.raises(ContainerError, match="overlaps"):
        WeightContainer.from_bytes(bytes(data))
    dup = bytearray(c.to_bytes())
    dup[10 + 2] = ord("b")
    dup[10 + 2 + 1 + 17 + 2] = ord("b")
    with pytest.raises(ContainerError, match="duplicate"):
        WeightContainer.from_bytes(bytes(dup))


def test_bad_payloads():
    with pytest.raises(ContainerError):
        decode("dense", struct.pack("<II", 2, 2) + b"\0" * 4)
    with pytest.raises(ContainerError):
        decode("bcm", b"\0" * 3)
    with pytest.raises(ContainerError):
        decode("nope", b"")
    with pytest.raises(ShapeError):
        encode(np.zeros((1, 1, 1)))
    with pytest.raises(ContainerError):
        WeightContainer().put_raw("x", "nope", b"")
    with pytest.raises(ContainerError):
        WeightContainer().get("missing")


def test_atomic_write_leaves_no_temp(tmp_path):
    sample().write(tmp_path / "w.ftrw")
    assert [p.name for p in tmp_path.iterdir()] == ["w.ftrw"]
