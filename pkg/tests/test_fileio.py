import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imlfista.fileio import (
    FormatError, load_image, load_selector, load_visibilities, save_image, save_pgm, save_selector,
    save_visibilities,
)
from imlfista.measurement import UVCoverage


def test_image_roundtrip_bit_exact(tmp_path, rng):
    x = rng.standard_normal((5, 7))
    x[0, 0] = -0.0
    save_image(tmp_path / "x.img", x)
    y = load_image(tmp_path / "x.img")
    assert y.shape == (5, 7) and y.tobytes() == x.tobytes()


def test_image_layout(tmp_path):
    save_image(tmp_path / "x.img", np.arange(6.0).reshape(2, 3))
    raw = (tmp_path / "x.img").read_bytes()
    assert raw[:12] == b"IMLFISTA-IMG" and raw[12:16] == b"\x01\x00\x00\x00"
    header, payload = raw[16:].split(b"\n", 1)
    assert header == b'{"width":3,"height":2,"dtype":"f64le"}'
    assert np.frombuffer(payload, "<f8").tolist() == [0, 1, 2, 3, 4, 5]


def test_truncated_payload_reports_offset(tmp_path, rng):
    save_image(tmp_path / "x.img", rng.standard_normal((4, 4)))
    raw = (tmp_path / "x.img").read_bytes()
    (tmp_path / "t.img").write_bytes(raw[:-8])
    with pytest.raises(FormatError) as err:
        load_image(tmp_path / "t.img")
    assert err.value.offset == len(raw) - 8


def test_header_mismatch_and_bad_magic(tmp_path):
    body = b'{"width":4,"height":4,"dtype":"f64le"}\n' + bytes(8 * 15)
    (tmp_path / "m.img").write_bytes(b"IMLFISTA-IMG\x01\x00\x00\x00" + body)
    with pytest.raises(FormatError, match="payload"):
        load_image(tmp_path / "m.img")
    (tmp_path / "b.img").write_bytes(b"NOTANIMAGE!!\x01\x00\x00\x00" + body)
    with pytest.raises(FormatError) as err:
        load_image(tmp_path / "b.img")
    assert err.value.offset == 0
    (tmp_path / "j.img").write_bytes(b"IMLFISTA-IMG\x01\x00\x00\x00{bad\n")
    with pytest.raises(FormatError, match="JSON"):
        load_image(tmp_path / "j.img")


@given(st.lists(st.integers(0, 5), min_size=1, max_size=40))
def test_visibility_roundtrip_preserves_tracks(tracks):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(len(tracks))
    m = len(tracks)
    cov = UVCoverage(rng.uniform(-3, 3, (m, 2)), tracks, rng.uniform(1, 100, 6))
    vals = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "v.vis"
        save_visibilities(path, vals, cov)
        back, cov2 = load_visibilities(path)
    assert np.array_equal(back, vals)
    assert np.array_equal(cov2.track, cov.track)
    assert np.array_equal(cov2.uv, cov.uv)
    assert np.array_equal(cov2.baseline_length, cov.baseline_length)


def test_visibility_length_check(tmp_path):
    cov = UVCoverage(np.zeros((3, 2)), [0, 0, 0], [1.0])
    with pytest.raises(ValueError):
        save_visibilities(tmp_path / "v.vis", np.zeros(2), cov)


def test_selector_roundtrip(tmp_path):
    save_selector(tmp_path / "s.sel", [5, 1, 3], 10, 0.5)
    idx, header = load_selector(tmp_path / "s.sel")
    assert idx.tolist() == [1, 3, 5] and header["parent_m"] == 10


def test_pgm_export(tmp_path, rng):
    x = np.abs(rng.standard_normal((6, 5)))
    save_pgm(tmp_path / "x.pgm", x)
    raw = (tmp_path / "x.pgm").read_bytes()
    assert raw.startswith(b"P5\n5 6\n65535\n")
    data = np.frombuffer(raw[len(b"P5\n5 6\n65535\n"):], ">u2")
    assert data.size == 30 and data.max() == 65535 and data.min() == 0
