import numpy as np
import pytest

from hazelift.metrics import (
    PSNR_CAP_DB,
    ciede2000,
    delta_e_ciede2000,
    psnr,
    srgb_to_lab,
    ssim,
)

# Published CIEDE2000 verification pairs (Lab1, Lab2, expected dE00),
# cross-checked against an independent implementation during development.
CIEDE2000_PAIRS = [
    ((50.0000, 2.6772, -79.7751), (50.0000, 0.0000, -82.7485), 2.0425),
    ((50.0000, 3.1571, -77.2803), (50.0000, 0.0000, -82.7485), 2.8615),
    ((50.0000, 2.8361, -74.0200), (50.0000, 0.0000, -82.7485), 3.4412),
    ((50.0000, -1.3802, -84.2814), (50.0000, 0.0000, -82.7485), 1.0000),
    ((50.0000, -1.1848, -84.8006), (50.0000, 0.0000, -82.7485), 1.0000),
    ((50.0000, -0.9009, -85.5211), (50.0000, 0.0000, -82.7485), 1.0000),
    ((50.0000, 0.0000, 0.0000), (50.0000, -1.0000, 2.0000), 2.3669),
    ((50.0000, -1.0000, 2.0000), (50.0000, 0.0000, 0.0000), 2.3669),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0009), 7.1792),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0010), 7.1792),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0011), 7.2195),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0012), 7.2195),
    ((50.0000, -0.0010, 2.4900), (50.0000, 0.0009, -2.4900), 4.8045),
    ((50.0000, -0.0010, 2.4900), (50.0000, 0.0010, -2.4900), 4.8045),
    ((50.0000, -0.0010, 2.4900), (50.0000, 0.0011, -2.4900), 4.7461),
    ((50.0000, 2.5000, 0.0000), (50.0000, 0.0000, -2.5000), 4.3065),
    ((50.0000, 2.5000, 0.0000), (73.0000, 25.0000, -18.0000), 27.1492),
    ((50.0000, 2.5000, 0.0000), (61.0000, -5.0000, 29.0000), 22.8977),
    ((50.0000, 2.5000, 0.0000), (56.0000, -27.0000, -3.0000), 31.9030),
    ((50.0000, 2.5000, 0.0000), (58.0000, 24.0000, 15.0000), 19.4535),
    ((50.0000, 2.5000, 0.0000), (50.0000, 3.1736, 0.5854), 1.0000),
    ((50.0000, 2.5000, 0.0000), (50.0000, 3.2972, 0.0000), 1.0000),
    ((50.0000, 2.5000, 0.0000), (50.0000, 1.8634, 0.5757), 1.0000),
    ((50.0000, 2.5000, 0.0000), (50.0000, 3.2592, 0.3350), 1.0000),
    ((60.2574, -34.0099, 36.2677), (60.4626, -34.1751, 39.4387), 1.2644),
    ((63.0109, -31.0961, -5.8663), (62.8187, -29.7946, -4.0864), 1.2630),
    ((61.2901, 3.7196, -5.3901), (61.4292, 2.2480, -4.9620), 1.8731),
    ((35.0831, -44.1164, 3.7933), (35.0232, -40.0716, 1.5901), 1.8645),
    ((22.7233, 20.0904, -46.6940), (23.0331, 14.9730, -42.5619), 2.0373),
    ((36.4612, 47.8580, 18.3852), (36.2715, 50.5065, 21.2231), 1.4146),
    ((90.8027, -2.0831, 1.4410), (91.1528, -1.6435, 0.0447), 1.4441),
    ((90.9257, -0.5406, -0.9208), (88.6381, -0.8985, -0.7239), 1.5381),
    ((6.7747, -0.2908, -2.4247), (5.8714, -0.0985, -2.2286), 0.6377),
    ((2.0776, 0.0795, -1.1350), (0.9033, -0.0636, -0.5514), 0.9082),
]


class TestPsnr:
    def test_identical_images_hit_cap(self, rng):
        img = rng.random((16, 16, 3))
        assert psnr(img, img) == PSNR_CAP_DB

    def test_known_mse(self):
        a = np.zeros((10, 10, 3))
        b = np.full((10, 10, 3), 0.1)
        assert abs(psnr(a, b) - 20.0) < 1e-9

    def test_extremes(self):
        a = np.zeros((4, 4, 3))
        b = np.ones((4, 4, 3))
        assert abs(psnr(a, b) - 0.0) < 1e-12

    def test_symmetric(self, rng):
        a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_decreases_with_noise_amplitude(self, rng):
        base = rng.random((32, 32, 3))
        values = []
        for amp in (0.01, 0.05, 0.1, 0.3):
            noisy = np.clip(base + amp * rng.uniform(-1, 1, base.shape), 0, 1)
            values.append(psnr(base, noisy))
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_dim_mismatch(self, rng):
        with pytest.raises(ValueError):
            psnr(rng.random((4, 4, 3)), rng.random((4, 5, 3)))


class TestSsim:
    def test_self_similarity_is_exactly_one(self, rng):
        img = rng.random((24, 24, 3))
        assert ssim(img, img) == 1.0

    def test_negative_for_inverted_structure(self, rng):
        img = rng.random((32, 32, 3))
        assert ssim(img, 1.0 - img) < 0.0

    def test_matches_reference_implementation(self, rng):
        pytest.importorskip("skimage")
        from skimage.metrics import structural_similarity as sk_ssim

        from hazelift.metrics import to_grayscale

        a = rng.random((32, 32, 3))
        b = np.clip(a + rng.normal(0.0, 0.08, a.shape), 0.0, 1.0)
        expected = sk_ssim(
            to_grayscale(a),
            to_grayscale(b),
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            data_range=1.0,
        )
        assert abs(ssim(a, b) - expected) < 1e-4

    def test_symmetric(self, rng):
        a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_too_small_rejected(self, rng):
        with pytest.raises(ValueError, match="at least"):
            ssim(rng.random((8, 8, 3)), rng.random((8, 8, 3)))


class TestCiede2000:
    def test_published_pairs(self):
        lab1 = np.array([p[0] for p in CIEDE2000_PAIRS])
        lab2 = np.array([p[1] for p in CIEDE2000_PAIRS])
        expected = np.array([p[2] for p in CIEDE2000_PAIRS])
        got = delta_e_ciede2000(lab1, lab2)
        assert np.abs(got - expected).max() < 1e-4

    def test_identical_images_zero(self, rng):
        img = rng.random((8, 8, 3))
        assert ciede2000(img, img) == 0.0

    def test_symmetric(self, rng):
        a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
        assert abs(ciede2000(a, b) - ciede2000(b, a)) < 1e-12

    def test_lab_conversion_sane(self):
        lab = srgb_to_lab(np.ones((1, 1, 3)))[0, 0]
        assert abs(lab[0] - 100.0) < 1e-3
        assert abs(lab[1]) < 1e-3 and abs(lab[2]) < 1e-3
        black = srgb_to_lab(np.zeros((1, 1, 3)))[0, 0]
        assert abs(black[0]) < 1e-9

    def test_lab_matches_reference(self, rng):
        pytest.importorskip("skimage")
        from skimage.color import rgb2lab

        img = rng.random((8, 8, 3))
        # implementations use slightly different white point precision
        assert np.abs(srgb_to_lab(img) - rgb2lab(img)).max() < 0.01
