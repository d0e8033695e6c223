import numpy as np
import pytest

from osfuse.core.errors import DimensionError, ImageFormatError, InputError
from osfuse.data.pnm import decode_pnm, encode_pnm, read_image, write_image


def test_decode_grayscale():
    img = decode_pnm(b"P5\n2 1\n255\n\x00\xff")
    np.testing.assert_array_equal(img, [[0.0, 1.0]])


def test_decode_color_with_comment():
    img = decode_pnm(b"P6 # made by hand\n1 1\n255\n\xff\x00\x80")
    assert img.shape == (1, 1, 3)
    np.testing.assert_allclose(img[0, 0], [1.0, 0.0, 128 / 255])


def test_png_is_rejected_with_its_magic_bytes():
    with pytest.raises(ImageFormatError, match=r"magic bytes b'\\x89P'") as info:
        decode_pnm(b"\x89PNG\r\n\x1a\n")
    assert info.value.magic == b"\x89P"
    assert isinstance(info.value, InputError)


def test_truncated_payload():
    with pytest.raises(ImageFormatError, match="expected 4 bytes, got 2"):
        decode_pnm(b"P5\n2 2\n255\n\x00\x01")


def test_other_header_problems():
    with pytest.raises(ImageFormatError):
        decode_pnm(b"P5\n2")
    with pytest.raises(ImageFormatError, match="maxval"):
        decode_pnm(b"P5\n1 1\n65535\n\x00\x00")


def test_encode_and_decode_exact_levels(rng):
    img = rng.integers(0, 256, size=(5, 7, 3)) / 255.0
    np.testing.assert_array_equal(decode_pnm(encode_pnm(img)), img)
    gray = rng.integers(0, 256, size=(4, 3)) / 255.0
    np.testing.assert_array_equal(decode_pnm(encode_pnm(gray[:, :, None])), gray)


def test_encode_rejects_unsupported_shapes():
    with pytest.raises(DimensionError):
        encode_pnm(np.zeros((2, 2, 4)))
    with pytest.raises(DimensionError):
        encode_pnm(np.zeros((0, 2)))


def test_files_clip_out_of_range_values(tmp_path):
    path = tmp_path / "img.pgm"
    write_image(path, np.array([[-0.5, 0.5, 2.0]]))
    np.testing.assert_allclose(read_image(path), [[0.0, 128 / 255, 1.0]])
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"GIF89a")
    with pytest.raises(ImageFormatError, match="bad.pgm"):
        read_image(bad)
