import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rawpipe.cfa import (B, G, R, BayerPattern, CfaImage, DimensionError, NoiseSpec, add_noise,
                         apply_mask, compose, make_mask, mosaic)

patterns = st.sampled_from(list(BayerPattern))
even = st.integers(1, 8).map(lambda k: 2 * k)


def test_rggb_mask_definition():
    m = make_mask("RGGB", 2, 2)
    np.testing.assert_array_equal(m.red, [[1, 0], [0, 0]])
    np.testing.assert_array_equal(m.green, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(m.blue, [[0, 0], [0, 1]])


def test_bggr_mask_definition():
    m = make_mask(BayerPattern.BGGR, 2, 2)
    np.testing.assert_array_equal(m.blue, [[1, 0], [0, 0]])
    np.testing.assert_array_equal(m.red, [[0, 0], [0, 1]])


@pytest.mark.parametrize("pattern", list(BayerPattern))
def test_cell_is_permutation_of_rggb(pattern):
    assert sorted(pattern.cell.ravel().tolist()) == [R, G, G, B]


def test_parse_is_case_insensitive():
    assert BayerPattern.parse("grbg") is BayerPattern.GRBG
    with pytest.raises(ValueError):
        BayerPattern.parse("RGBG")


@given(patterns, even, even)
def test_mask_partitions_pixels(pattern, h, w):
    m = make_mask(pattern, h, w)
    np.testing.assert_array_equal(m.planes.sum(axis=0), np.ones((h, w)))
    np.testing.assert_array_equal(m.inverse, 1 - m.planes)
    assert m.green.sum() == 2 * m.red.sum() == 2 * m.blue.sum()


@pytest.mark.parametrize("h,w", [(3, 4), (4, 5), (0, 2), (1, 1)])
def test_odd_or_empty_dimensions_rejected(h, w):
    with pytest.raises(DimensionError):
        make_mask("RGGB", h, w)


def test_mosaic_rggb_picks_expected_channels():
    x = np.stack([np.full((2, 2), v) for v in (10.0, 20.0, 30.0)])
    np.testing.assert_array_equal(mosaic(x, "RGGB").samples, [[10, 20], [20, 30]])


@given(patterns, even, even, st.integers(0, 2 ** 32 - 1))
def test_mosaic_embed_round_trip(pattern, h, w, seed):
    x = np.random.default_rng(seed).uniform(0, 255, (3, h, w))
    y = mosaic(x, pattern)
    np.testing.assert_array_equal(y.embed(), apply_mask(x, y.mask()))
    np.testing.assert_array_equal(mosaic(y.embed(), pattern).samples, y.samples)


def test_mosaic_rejects_non_rgb():
    with pytest.raises(DimensionError):
        mosaic(np.zeros((4, 4)))
    with pytest.raises(DimensionError):
        CfaImage(np.zeros((3, 4)))


@given(patterns, st.integers(-3, 3), st.integers(-3, 3))
def test_shifted_pattern_matches_translated_mosaic(pattern, di, dj):
    x = np.random.default_rng(7).uniform(0, 255, (3, 12, 12))
    x2 = np.roll(x, (di, dj), axis=(1, 2))
    np.testing.assert_array_equal(mosaic(x2, pattern.shifted(di, dj)).samples,
                                  np.roll(mosaic(x, pattern).samples, (di, dj), axis=(0, 1)))


def test_noise_statistics():
    y = CfaImage(np.full((512, 512), 128.0))
    z = add_noise(y, NoiseSpec(10.0, seed=3))
    d = z.samples - y.samples
    assert abs(d.mean()) < 0.3
    assert abs(d.std() - 10.0) < 0.5


def test_noise_seed_determinism_and_no_clipping():
    y = CfaImage(np.zeros((64, 64)))
    a = add_noise(y, NoiseSpec(20.0, seed=11))
    b = add_noise(y, NoiseSpec(20.0, seed=11))
    c = add_noise(y, NoiseSpec(20.0, seed=12))
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert a.samples.min() < 0


def test_zero_sigma_is_identity():
    y = mosaic(np.random.default_rng(0).uniform(0, 255, (3, 8, 8)))
    z = add_noise(y, NoiseSpec(0.0, seed=5))
    np.testing.assert_array_equal(z.samples, y.samples)
    assert z.pattern is y.pattern


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


def test_compose_takes_samples_on_mask():
    m = make_mask("RGGB", 4, 4)
    a = np.ones((3, 4, 4))
    b = np.zeros((3, 4, 4))
    np.testing.assert_array_equal(compose(a, b, m), m.planes)
