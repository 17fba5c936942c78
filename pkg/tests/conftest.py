import numpy as np
import pytest


def numerical_grad(f, x, h=1e-3):
    """Central finite differences of scalar f with respect to array x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(analytic, numeric):
    """Max absolute difference over the larger of the two max magnitudes.

    The floor keeps the comparison meaningful when a gradient is truly
    zero (e.g. a bias immediately normalized away by batch norm), where
    a pure relative error would amplify finite-difference noise.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-3)
    return float(np.abs(analytic - numeric).max() / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
