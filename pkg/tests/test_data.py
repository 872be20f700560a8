import logging

import cv2
import numpy as np
import pytest

from rawpipe.cfa import BayerPattern, CfaImage, NoiseSpec, add_noise, mosaic
from rawpipe.data import (DatasetError, desk_corpus, ingest_dataset, ingest_dataset_report,
                          read_cfa_png, read_image, write_cfa_png, write_rgb_png)


def _rgb(seed, h=16, w=12):
    return np.random.default_rng(seed).integers(0, 256, (3, h, w)).astype(np.float64)


def test_rgb_png_round_trip(tmp_path):
    x = _rgb(0)
    write_rgb_png(tmp_path / "a.png", x)
    np.testing.assert_array_equal(read_image(tmp_path / "a.png"), x)


def test_channel_order_is_rgb(tmp_path):
    x = np.zeros((3, 4, 4))
    x[0] = 255  # pure red
    write_rgb_png(tmp_path / "r.png", x)
    bgr = cv2.imread(str(tmp_path / "r.png"))
    assert bgr[0, 0].tolist() == [0, 0, 255]


def test_16_bit_png_scaled_to_255(tmp_path):
    v = np.array([[0, 65535], [32768, 257]], dtype=np.uint16)
    cv2.imwrite(str(tmp_path / "w.png"), np.stack([v] * 3, axis=-1))
    x = read_image(tmp_path / "w.png")
    np.testing.assert_allclose(x[1], v.astype(np.float64) * 255 / 65535)


def test_gray_and_rgba_inputs(tmp_path):
    cv2.imwrite(str(tmp_path / "g.png"), np.full((4, 6), 9, np.uint8))
    x = read_image(tmp_path / "g.png")
    assert x.shape == (3, 4, 6) and np.all(x == 9)
    rgba = np.zeros((4, 4, 4), np.uint8)
    rgba[..., 0] = 50  # blue in BGRA
    cv2.imwrite(str(tmp_path / "a.png"), rgba)
    assert read_image(tmp_path / "a.png")[2, 0, 0] == 50


def test_ingest_skips_corrupt_and_non_images(tmp_path, caplog):
    for k in range(4):
        write_rgb_png(tmp_path / f"img{k}.png", _rgb(k))
    (tmp_path / "broken.png").write_bytes(b"\x89PNG\r\n\x1a\nnot really")
    (tmp_path / "notes.txt").write_text("hello")
    with caplog.at_level(logging.WARNING):
        images, skipped = ingest_dataset_report(tmp_path)
    assert [n for n, _ in images] == ["img0", "img1", "img2", "img3"]
    assert [n for n, _ in skipped] == ["broken.png"]
    assert "broken.png" in caplog.text


def test_ingest_empty_dir_errors(tmp_path):
    with pytest.raises(DatasetError):
        ingest_dataset(tmp_path)
    with pytest.raises(DatasetError):
        ingest_dataset(tmp_path / "missing")


def test_ingest_crops_odd_sizes(tmp_path, caplog):
    write_rgb_png(tmp_path / "odd.png", _rgb(1, 15, 13))
    with caplog.at_level(logging.WARNING):
        [(name, x)] = ingest_dataset(tmp_path)
    assert x.shape == (3, 14, 12)
    assert "odd size" in caplog.text


def test_cfa_container_round_trip(tmp_path):
    y = add_noise(mosaic(np.clip(_rgb(2), 30, 220), "GBRG"), NoiseSpec(5.0, 1))
    write_cfa_png(tmp_path / "c.png", y)
    assert (tmp_path / "c.cfa.txt").read_text().startswith("rawpipe-cfa 1 pattern=GBRG")
    back = read_cfa_png(tmp_path / "c.png")
    assert back.pattern is BayerPattern.GBRG
    assert np.max(np.abs(back.samples - y.samples)) <= 1 / 512 + 1e-12


def test_cfa_container_clamps_out_of_range(tmp_path):
    y = CfaImage(np.array([[-5.0, 10.0], [300.0, 255.0]]))
    back = read_cfa_png(write_cfa_png(tmp_path / "c.png", y))
    np.testing.assert_allclose(back.samples, [[0, 10], [65535 / 256, 255]])


def test_cfa_container_without_sidecar(tmp_path):
    path = write_cfa_png(tmp_path / "c.png", mosaic(_rgb(3)))
    (tmp_path / "c.cfa.txt").unlink()
    with pytest.raises(DatasetError):
        read_cfa_png(path)
    assert read_cfa_png(path, "BGGR").pattern is BayerPattern.BGGR


def test_desk_corpus_is_fixed():
    a = desk_corpus(8, 32, seed=1)
    b = desk_corpus(8, 32, seed=1)
    assert len(a) == 8 and all(x.shape == (3, 32, 32) for _, x in a)
    for (n1, x1), (n2, x2) in zip(a, b):
        assert n1 == n2
        np.testing.assert_array_equal(x1, x2)
