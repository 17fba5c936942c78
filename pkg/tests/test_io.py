import numpy as np
import pytest

from hazelift import io


@pytest.fixture
def image(rng):
    return rng.random((9, 7, 3)).astype(np.float32)


def test_png_8bit_round_trip(tmp_path, image):
    path = tmp_path / "img.png"
    io.save_image(path, image, bit_depth=8)
    loaded = io.load_image(path)
    assert loaded.shape == image.shape
    assert loaded.dtype == np.float32
    assert np.abs(loaded - image).max() <= 0.5 / 255.0 + 1e-6


def test_png_16bit_round_trip(tmp_path, image):
    path = tmp_path / "img16.png"
    io.save_image(path, image, bit_depth=16)
    loaded = io.load_image(path)
    assert np.abs(loaded - image).max() <= 0.5 / 65535.0 + 1e-7


def test_png_16bit_preserves_color_order(tmp_path):
    img = np.zeros((2, 2, 3), dtype=np.float32)
    img[:, :, 0] = 1.0  # pure red
    path = tmp_path / "red.png"
    io.save_image(path, img, bit_depth=16)
    loaded = io.load_image(path)
    np.testing.assert_allclose(loaded[:, :, 0], 1.0)
    np.testing.assert_allclose(loaded[:, :, 1:], 0.0)


def test_ppm_8bit_round_trip(tmp_path, image):
    path = tmp_path / "img.ppm"
    io.save_image(path, image, bit_depth=8)
    loaded = io.load_image(path)
    assert np.abs(loaded - image).max() <= 0.5 / 255.0 + 1e-6


def test_ppm_16bit_round_trip(tmp_path, image):
    path = tmp_path / "img16.ppm"
    io.save_image(path, image, bit_depth=16)
    loaded = io.load_image(path)
    assert np.abs(loaded - image).max() <= 0.5 / 65535.0 + 1e-7


def test_pfm_round_trip_is_exact(tmp_path, rng):
    depth = (rng.random((11, 6)) * 10.0).astype(np.float32)
    path = tmp_path / "depth.pfm"
    io.save_pfm(path, depth)
    loaded = io.load_pfm(path)
    np.testing.assert_array_equal(loaded, depth)


def test_pfm_row_order_is_top_down(tmp_path):
    # distinct first/last rows expose a vertical flip
    depth = np.arange(12, dtype=np.float32).reshape(4, 3)
    path = tmp_path / "ramp.pfm"
    io.save_pfm(path, depth)
    loaded = io.load_pfm(path)
    assert loaded[0, 0] == 0.0
    assert loaded[3, 2] == 11.0


def test_map_png_16bit_round_trip(tmp_path, rng):
    t = rng.random((8, 8)).astype(np.float32)
    path = tmp_path / "t.png"
    io.save_map(path, t)
    loaded = io.load_map(path)
    assert np.abs(loaded - t).max() <= 0.5 / 65535.0 + 1e-7


def test_load_missing_file_raises(tmp_path):
    with pytest.raises(ValueError, match="cannot read"):
        io.load_image(tmp_path / "nope.png")


def test_pfm_rejects_color(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
    with pytest.raises(ValueError, match="3-channel"):
        io.load_pfm(path)


def test_grayscale_png_loads_as_3_channel(tmp_path, rng):
    t = rng.random((5, 5)).astype(np.float32)
    path = tmp_path / "gray.png"
    io.save_map(path, t, bit_depth=8)
    loaded = io.load_image(path)
    assert loaded.shape == (5, 5, 3)
