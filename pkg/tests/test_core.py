import numpy as np
import pytest

from qtc.core import BitReader, BitString, SeedPath, TruncatedStreamError


def test_write_examples():
    assert BitString().write_uint(5, 3).to01() == "101"
    assert BitString().write_uint(0, 1).to01() == "0"
    assert BitString().write_uint(1, 1).write_uint(2, 2).to01() == "110"


def test_roundtrip_all_widths():
    rng = np.random.default_rng(0)
    bs = BitString()
    fields = []
    for width in range(1, 65):
        value = int(rng.integers(0, 1 << min(width, 62))) % (1 << width)
        fields.append((value, width))
        bs.write_uint(value, width)
    assert bs.nbits == sum(w for _, w in fields)
    reader = BitReader(bs)
    for value, width in fields:
        assert reader.read_uint(width) == value
    # boundary: the full 64-bit range
    big = (1 << 64) - 1
    bs2 = BitString().write_uint(big, 64)
    assert BitReader(bs2).read_uint(64) == big


def test_bit_accounting_is_exact():
    bs = BitString()
    total = 0
    for width in (1, 3, 7, 31, 32, 33, 64, 5):
        bs.write_uint(0, width)
        total += width
        assert bs.nbits == total


def test_value_out_of_range_rejected():
    with pytest.raises(ValueError):
        BitString().write_uint(2, 1)
    with pytest.raises(ValueError):
        BitString().write_uint(-1, 4)
    with pytest.raises(ValueError):
        BitString().write_uint(0, 0)


def test_truncated_stream_error():
    bs = BitString().write_uint(3, 2)
    reader = BitReader(bs)
    assert reader.read_uint(2) == 3
    with pytest.raises(TruncatedStreamError):
        reader.read_uint(1)
    reader2 = BitReader(BitString().write_uint(6, 3), cursor=2)
    with pytest.raises(TruncatedStreamError):
        reader2.read_uint(2)


def test_extend_concatenates():
    a = BitString().write_uint(5, 3)
    b = BitString().write_uint(1, 2)
    a.extend(b)
    assert a.to01() == "10101"


def test_seedpath_determinism():
    p = SeedPath(42).child("client", 3).child("round", 7)
    first = p.stream().integers(0, 1 << 63, size=100)
    second = p.stream().integers(0, 1 << 63, size=100)
    assert np.array_equal(first, second)


def test_seedpath_streams_distinct():
    seen = set()
    for i in range(10_000):
        word = int(SeedPath(9).child("rep", i).stream().integers(0, 1 << 63))
        seen.add(word)
    assert len(seen) == 10_000  # no identical first words among 1e4 streams


def test_sibling_labels_differ():
    a = SeedPath(1).child("x", 0).stream().integers(0, 1 << 63, 2)
    b = SeedPath(1).child("x", 1).stream().integers(0, 1 << 63, 2)
    c = SeedPath(1).child("y", 0).stream().integers(0, 1 << 63, 2)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_uniform_real_mean():
    vals = SeedPath(5).stream().random(10**6)
    assert abs(vals.mean() - 0.5) < 0.002
    assert vals.min() >= 0.0 and vals.max() < 1.0
