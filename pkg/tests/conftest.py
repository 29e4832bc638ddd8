import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def stroke_digits(count, seed=0, size=28):
    """Fake "1" digits: a blurred slanted bar, as uint8 arrays (count, size, size)."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    out = np.zeros((count, size, size), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size] - (size - 1) / 2
    for k in range(count):
        t = rng.uniform(-0.3, 0.3)
        x0 = rng.uniform(-1.5, 1.5)
        d = np.abs((xx - x0) * np.cos(t) - yy * np.sin(t))
        bar = (d < 1.6) & (np.abs(yy) < size * 0.32)
        img = gaussian_filter(bar.astype(float), 0.7)
        out[k] = np.clip(255 * img / img.max(), 0, 255).astype(np.uint8)
    return out


@pytest.fixture
def mnist_dir(tmp_path):
    """Directory holding MNIST-style IDX training files with 40 fake images."""
    from groupdict.formats import write_idx_images, write_idx_labels

    pix = stroke_digits(40, seed=5)
    labels = np.array([1, 7] * 20, dtype=np.uint8)
    write_idx_images(tmp_path / "train-images-idx3-ubyte", pix)
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte", labels)
    return tmp_path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
