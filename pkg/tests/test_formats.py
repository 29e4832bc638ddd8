import gzip
import struct

import numpy as np
import pytest

from groupdict.formats import (
    FormatError,
    dumps_coefficients,
    load_coefficients,
    loads_coefficients,
    parse_idx,
    parse_idx_labels,
    save_coefficients,
    write_coefficients_csv,
    write_idx_images,
    write_idx_labels,
)
from groupdict.harmonics import FourierCoefficients, Group, enumerate_irreps


@pytest.mark.parametrize("group,n", [(Group.SO2, 3), (Group.O2, 2), (Group.SO3, 2)])
def test_container_round_trip(group, n, rng, tmp_path):
    recs = [FourierCoefficients.random(enumerate_irreps(group, n), rng) for _ in range(3)]
    path = tmp_path / "c.gdfc"
    save_coefficients(path, recs)
    back = load_coefficients(path)
    assert len(back) == 3
    for a, b in zip(recs, back):
        assert a.table == b.table
        assert all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))
    assert dumps_coefficients(back) == path.read_bytes()


def test_container_golden_bytes():
    table = enumerate_irreps(Group.SO2, 0)
    rec = FourierCoefficients(table, [np.array([[1.5 - 2j]])])
    expected = (
        b"GDFC" + struct.pack("<II", 1, 1) + struct.pack("<Bii", 0, 0, 1)
        + struct.pack("<ii", 0, 1) + struct.pack("<dd", 1.5, -2.0)
    )
    assert dumps_coefficients([rec]) == expected


def test_container_rejects_bad_input(rng):
    data = dumps_coefficients([FourierCoefficients.random(enumerate_irreps(Group.SO3, 1), rng)])
    with pytest.raises(FormatError):
        loads_coefficients(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        loads_coefficients(data[:-3])
    with pytest.raises(FormatError):
        loads_coefficients(data + b"\0")


def test_coefficient_csv(rng, tmp_path):
    c = FourierCoefficients.random(enumerate_irreps(Group.SO3, 1), rng)
    path = tmp_path / "c.csv"
    write_coefficients_csv(path, c)
    lines = path.read_text().splitlines()
    assert lines[0] == "irrep,row,col,re,im"
    assert len(lines) == 1 + 1 + 9
    label, r, col, re, im = lines[5].split(",")
    assert complex(float(re), float(im)) == c.blocks[1][int(r), int(col)]


def _golden_idx(tmp_path):
    pix = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    pix[1, 2, 3] = 255
    raw = struct.pack(">IIII", 0x803, 2, 3, 4) + pix.tobytes()
    return pix, raw


def test_idx_images_golden(tmp_path):
    pix, raw = _golden_idx(tmp_path)
    path = tmp_path / "img.idx"
    path.write_bytes(raw)
    imgs = parse_idx(path)
    assert len(imgs) == 2
    assert (imgs[0].width, imgs[0].height) == (4, 3)
    assert np.array_equal(imgs[0].intensities, pix[0] / 255.0)
    assert imgs[1].intensities[2, 3] == 1.0
    out = tmp_path / "again.idx"
    write_idx_images(out, pix)
    assert out.read_bytes() == raw


def test_idx_gzip(tmp_path):
    pix, raw = _golden_idx(tmp_path)
    path = tmp_path / "img.idx.gz"
    path.write_bytes(gzip.compress(raw))
    assert np.array_equal(parse_idx(path)[1].intensities, pix[1] / 255.0)


def test_idx_errors(tmp_path):
    _, raw = _golden_idx(tmp_path)
    bad = tmp_path / "bad.idx"
    bad.write_bytes(struct.pack(">I", 0x801) + raw[4:])
    with pytest.raises(FormatError):
        parse_idx(bad)
    short = tmp_path / "short.idx"
    short.write_bytes(raw[:-1])
    with pytest.raises(FormatError):
        parse_idx(short)
    short.write_bytes(raw[:10])
    with pytest.raises(FormatError):
        parse_idx(short)


def test_idx_labels(tmp_path):
    path = tmp_path / "lab.idx"
    write_idx_labels(path, [1, 7, 3])
    assert path.read_bytes() == struct.pack(">II", 0x801, 3) + bytes([1, 7, 3])
    assert parse_idx_labels(path).tolist() == [1, 7, 3]
    path.write_bytes(struct.pack(">II", 0x803, 3))
    with pytest.raises(FormatError):
        parse_idx_labels(path)
