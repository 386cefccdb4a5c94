import numpy as np
import pytest

from uqlab.preproc import (
    Image,
    PreprocConfig,
    PreprocError,
    clip_boundary,
    clip_mask,
    estimate_radius,
    gaussian_blur,
    preprocess,
    quantize,
    read_image,
    rescale_to_radius,
    subtract_local_average,
    write_image,
)


def disc(radius, size=100, value=255.0, channels=1):
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    d = ((yy - size / 2) ** 2 + (xx - size / 2) ** 2 <= radius**2) * value
    return Image(np.repeat(d[:, :, None], channels, axis=2))


def test_radius_examples():
    assert abs(estimate_radius(disc(40)) - 40) <= 1
    assert estimate_radius(Image(np.full((30, 50), 200.0))) == 25
    with pytest.raises(PreprocError):
        estimate_radius(Image(np.zeros((10, 10))))


@pytest.mark.parametrize("r", [12, 25, 33.3, 47])
def test_radius_on_various_discs(r):
    assert abs(estimate_radius(disc(r, channels=3)) - r) <= 1


def test_rescale_examples():
    img = disc(40)
    same = rescale_to_radius(img, 40)
    assert same.data.shape == img.data.shape and same.data is not img.data
    big = rescale_to_radius(img, 80)
    assert abs(big.height - 200) <= 1 and abs(big.width - 200) <= 1
    assert abs(estimate_radius(big) - 80) <= 2
    assert PreprocConfig().target_radius == 300


@pytest.mark.parametrize("bc", [5, 10, 20, 30])
def test_sigma_formula(bc):
    assert PreprocConfig(blur_constant=bc).sigma == 300 / bc
    assert PreprocConfig(target_radius=300, blur_constant=30).sigma == 10


def test_config_validation():
    for kw in ({"blur_constant": 0}, {"clip_fraction": 0}, {"clip_fraction": 1.2}, {"target_radius": -1}):
        with pytest.raises(PreprocError):
            PreprocConfig(**kw)


def test_blur_identity_on_constant():
    c = np.full((40, 30, 3), 91.25)
    for s in (0.5, 3.0, 10.0, 60.0):
        assert np.max(np.abs(gaussian_blur(c, s) - c)) < 1e-9


def test_subtract_local_average_constant_and_permutation():
    flat = subtract_local_average(Image(np.full((20, 20, 3), 40.0)))
    assert np.max(np.abs(flat.data - 128.0)) < 4e-9  # alpha times the blur tolerance
    assert np.all(quantize(flat) == 128)
    rng = np.random.default_rng(0)
    img = Image(rng.uniform(0, 255, (32, 24, 3)))
    cfg = PreprocConfig(target_radius=30, blur_constant=10)
    perm = [2, 0, 1]
    a = subtract_local_average(Image(img.data[:, :, perm]), cfg).data
    b = subtract_local_average(img, cfg).data[:, :, perm]
    assert np.array_equal(a, b)


def test_local_average_matches_unseparated_kernel():
    # dense 2-D Gaussian with reflected borders and 3-sigma truncation
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 255, (15, 17))
    s = 1.7
    r = int(3 * s + 0.5)
    k1 = np.exp(-0.5 * (np.arange(-r, r + 1) / s) ** 2)
    k1 /= k1.sum()
    padded = np.pad(x, r, mode="symmetric")
    dense = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            dense[i, j] = np.sum(np.outer(k1, k1) * padded[i:i + 2 * r + 1, j:j + 2 * r + 1])
    assert np.allclose(gaussian_blur(x[:, :, None], s)[:, :, 0], dense, atol=1e-9)


def test_clip_examples():
    img = disc(40)
    assert np.array_equal(clip_boundary(img, 1.0).data, img.data)
    for f in (0.1, 0.5, 0.9, 1.0):
        out = clip_boundary(Image(np.full((20, 20), 10.0)), f)
        assert out.data[0, 0, 0] == 0 and out.data[-1, -1, 0] == 0
    with pytest.raises(PreprocError):
        clip_boundary(img, 0.0)


def test_constant_pipeline():
    img = Image(np.full((60, 60, 3), 77.0))
    out = preprocess(img, PreprocConfig(target_radius=30, blur_constant=10), rescale=False)
    inside = clip_mask(60, 60, 0.9)
    assert np.max(np.abs(out.data[inside] - 128.0)) < 4e-9
    assert np.all(quantize(out)[inside] == 128)
    assert np.all(out.data[~inside] == 0.0)


def test_full_pipeline_rescales_then_processes():
    out = preprocess(disc(20, size=50, value=180.0), PreprocConfig(target_radius=40, blur_constant=10))
    assert abs(out.height - 100) <= 1
    assert out.data.min() >= 0 and out.data.max() <= 255


@pytest.mark.parametrize("channels,suffix", [(1, "pgm"), (3, "ppm")])
def test_io_round_trip(tmp_path, channels, suffix):
    rng = np.random.default_rng(2)
    data = rng.integers(0, 256, (9, 13, channels)).astype(float)
    p = tmp_path / f"x.{suffix}"
    write_image(Image(data), p)
    assert p.read_bytes()[:2] == (b"P5" if channels == 1 else b"P6")
    assert np.array_equal(read_image(p).data, data)


def test_read_rejects_other_formats(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"not an image")
    with pytest.raises(Exception):
        read_image(p)
