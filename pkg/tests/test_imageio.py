import numpy as np
import pytest

from diagcap.imageio import decode_pgm, encode_pgm, list_images, read_image, write_image


def test_pgm_round_trip(tmp_path, rng):
    img = np.rint(rng.random((5, 7)) * 255) / 255
    write_image(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.pgm"), img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n7 5\n255\n")


def test_decode_ascii_pgm_with_comment():
    data = b"P2\n# comment\n3 1\n10\n0 5 10\n"
    np.testing.assert_allclose(decode_pgm(data), [[0.0, 0.5, 1.0]])


def test_encode_rounds_to_bytes():
    assert encode_pgm(np.array([[0.0, 0.5, 1.0]]))[-3:] == bytes([0, 128, 255])


def test_rejects_non_pgm():
    with pytest.raises(ValueError):
        decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00")


def test_png_round_trip(tmp_path, rng):
    pytest.importorskip("PIL")
    img = np.rint(rng.random((4, 6)) * 255) / 255
    write_image(tmp_path / "b.png", img)
    np.testing.assert_array_equal(read_image(tmp_path / "b.png"), img)
    assert [p.name for p in list_images(tmp_path)] == ["b.png"]
