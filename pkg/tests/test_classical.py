import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from rawpipe.cfa import B, G, R, BayerPattern, CfaImage, mosaic
from rawpipe.classical import DemosaicMethod, demosaic, gbtf_green_difference
from rawpipe.metrics import psnr

METHODS = list(DemosaicMethod)
patterns = st.sampled_from(list(BayerPattern))


def _random_image(seed, h=24, w=24):
    return np.random.default_rng(seed).uniform(0, 255, (3, h, w))


@given(st.sampled_from(METHODS), patterns, st.integers(0, 2 ** 32 - 1))
def test_sampled_positions_retained_bit_exactly(method, pattern, seed):
    y = mosaic(_random_image(seed, 16, 20), pattern)
    x = demosaic(y, method)
    m = y.mask().planes > 0.5
    assert x.shape == (3, 16, 20)
    assert np.array_equal(x[m], np.broadcast_to(y.samples, (3, 16, 20))[m])


@pytest.mark.parametrize("method", METHODS)
def test_constant_gray_image_is_reproduced(method):
    y = mosaic(np.full((3, 20, 20), 77.0))
    np.testing.assert_allclose(demosaic(y, method), 77.0, atol=1e-9)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("pattern", list(BayerPattern))
def test_gray_linear_ramp_is_exact_in_interior(method, pattern):
    # every stencil reproduces affine signals when all channels agree
    i, j = np.mgrid[0:32, 0:32]
    ramp = 3.0 * i + 1.5 * j + 10
    x = demosaic(mosaic(np.stack([ramp] * 3), pattern), method)
    np.testing.assert_allclose(x[:, 8:-8, 8:-8], np.stack([ramp] * 3)[:, 8:-8, 8:-8], atol=1e-9)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("pattern", list(BayerPattern))
@pytest.mark.parametrize("shift", [(2, 0), (0, 2), (1, 0), (1, 1)])
def test_shift_pattern_consistency(method, pattern, shift):
    x = _random_image(5, 40, 40)
    di, dj = shift
    x2 = np.roll(x, shift, axis=(1, 2))
    a = demosaic(mosaic(x2, pattern.shifted(di, dj)), method)
    b = np.roll(demosaic(mosaic(x, pattern), method), shift, axis=(1, 2))
    np.testing.assert_allclose(a[:, 14:-14, 14:-14], b[:, 14:-14, 14:-14], atol=1e-9)


def test_bilinear_matches_classic_kernels():
    # zero-filled planes filtered with the textbook bilinear kernels
    x = _random_image(2, 30, 30)
    y = mosaic(x)
    planes = y.embed()
    kg = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]]) / 4
    krb = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]]) / 4
    ref = np.stack([ndimage.correlate(planes[R], krb), ndimage.correlate(planes[G], kg),
                    ndimage.correlate(planes[B], krb)])
    np.testing.assert_allclose(demosaic(y, "bilinear")[:, 1:-1, 1:-1], ref[:, 1:-1, 1:-1], atol=1e-9)


def _ha_green_at(s, i, j):
    gh = (s[i, j - 1] + s[i, j + 1]) / 2 + (2 * s[i, j] - s[i, j - 2] - s[i, j + 2]) / 4
    gv = (s[i - 1, j] + s[i + 1, j]) / 2 + (2 * s[i, j] - s[i - 2, j] - s[i + 2, j]) / 4
    dh = abs(s[i, j - 1] - s[i, j + 1]) + abs(2 * s[i, j] - s[i, j - 2] - s[i, j + 2])
    dv = abs(s[i - 1, j] - s[i + 1, j]) + abs(2 * s[i, j] - s[i - 2, j] - s[i + 2, j])
    if dh < dv:
        return gh
    if dv < dh:
        return gv
    return (gh + gv) / 2


def test_ha_green_matches_scalar_reference():
    x = _random_image(3, 20, 20)
    y = mosaic(x, "RGGB")
    g = demosaic(y, "ha")[G]
    s = y.samples
    for i in range(4, 16):
        for j in range(4, 16):
            if (i + j) % 2 == 0:  # R or B site under RGGB
                assert g[i, j] == pytest.approx(_ha_green_at(s, i, j), abs=1e-9)


def _gbtf_delta_reference(s, green, i, j):
    """Scalar GBTF color difference G - X at a non-green site (i, j)."""
    def h_est(a, b):
        return (s[a, b - 1] + s[a, b + 1]) / 2 + (2 * s[a, b] - s[a, b - 2] - s[a, b + 2]) / 4

    def v_est(a, b):
        return (s[a - 1, b] + s[a + 1, b]) / 2 + (2 * s[a, b] - s[a - 2, b] - s[a + 2, b]) / 4

    def dh(a, b):
        return s[a, b] - h_est(a, b) if green[a, b] else h_est(a, b) - s[a, b]

    def dv(a, b):
        return s[a, b] - v_est(a, b) if green[a, b] else v_est(a, b) - s[a, b]

    def gh(a, b):
        return abs(dh(a, b - 1) - dh(a, b + 1))

    def gv(a, b):
        return abs(dv(a - 1, b) - dv(a + 1, b))

    band = range(-2, 3)
    w = {
        "n": sum(gv(i + a, j + b) for a in range(-4, 1) for b in band),
        "s": sum(gv(i + a, j + b) for a in range(0, 5) for b in band),
        "w": sum(gh(i + a, j + b) for a in band for b in range(-4, 1)),
        "e": sum(gh(i + a, j + b) for a in band for b in range(0, 5)),
    }
    w = {k: 1 / (v * v + 1e-10) for k, v in w.items()}
    est = {
        "n": np.mean([dv(i + a, j) for a in range(-4, 1)]),
        "s": np.mean([dv(i + a, j) for a in range(0, 5)]),
        "w": np.mean([dh(i, j + b) for b in range(-4, 1)]),
        "e": np.mean([dh(i, j + b) for b in range(0, 5)]),
    }
    return sum(w[k] * est[k] for k in w) / sum(w.values())


def test_gbtf_green_difference_matches_scalar_reference():
    x = _random_image(9, 30, 30)
    y = mosaic(x, "GRBG")
    m = y.mask().planes
    delta = gbtf_green_difference(y.samples, m)
    green = m[G] > 0.5
    for i in range(11, 19):
        for j in range(11, 19):
            if not green[i, j]:
                ref = _gbtf_delta_reference(y.samples, green, i, j)
                assert delta[i, j] == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_gbtf_gray_constant_stays_achromatic():
    x = demosaic(mosaic(np.full((3, 24, 24), 200.0)), "gbtf")
    assert np.max(np.abs(x - x[G])) < 1e-9


@pytest.mark.parametrize("name", ["astronaut", "coffee", "chelsea"])
def test_bilinear_below_ha_below_gbtf_on_photographs(natural_images, name):
    x = natural_images[name]
    y = mosaic(x)
    p = {m: psnr(x, demosaic(y, m)) for m in ("bilinear", "ha", "gbtf")}
    assert p["bilinear"] < p["ha"] < p["gbtf"]


def test_mean_ordering_over_photographs(natural_images):
    scores = {m: [] for m in ("bilinear", "ha", "gbtf")}
    for x in natural_images.values():
        y = mosaic(x)
        for m in scores:
            scores[m].append(psnr(x, demosaic(y, m)))
    means = {m: np.mean(v) for m, v in scores.items()}
    assert means["bilinear"] < means["ha"] < means["gbtf"]


def test_method_parse():
    assert DemosaicMethod.parse("GBTF") is DemosaicMethod.GBTF
    with pytest.raises(ValueError):
        DemosaicMethod.parse("ahd")


def test_output_size_matches_input_for_tiny_image():
    y = CfaImage(np.arange(16.0).reshape(4, 4))
    for m in METHODS:
        assert demosaic(y, m).shape == (3, 4, 4)
