"""Image decoding, dataset ingestion and the CFA PNG container.

CFA container
-------------
A CFA image ``name.png`` is a single-channel 16-bit PNG whose stored value is
``clip(round(sample * 256), 0, 65535)``, next to a one-line sidecar text file
``name.cfa.txt``::

    rawpipe-cfa 1 pattern=RGGB scale=256

Samples outside [0, 65535/256] clamp; inside that range the 1/256 step bounds the
round-trip error at 1/512 per sample.
"""

from __future__ import annotations

import logging
from pathlib import Path

import cv2
import numpy as np

from .cfa import BayerPattern, CfaImage
from .metrics import quantize

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".tif", ".tiff"}
CFA_SCALE = 256


class DatasetError(RuntimeError):
    pass


def read_image(path) -> np.ndarray:
    """Decode an 8- or 16-bit RGB(A)/gray PNG or TIFF to ``(3, H, W)`` float64 in 0-255."""
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DatasetError(f"cannot decode {path}")
    if arr.dtype == np.uint16:
        scale = 255.0 / 65535.0
    elif arr.dtype == np.uint8:
        scale = 1.0
    else:
        raise DatasetError(f"{path}: unsupported sample type {arr.dtype}")
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    elif arr.shape[2] == 4:
        arr = cv2.cvtColor(arr, cv2.COLOR_BGRA2RGB)
    elif arr.shape[2] == 3:
        arr = cv2.cvtColor(arr, cv2.COLOR_BGR2RGB)
    else:
        raise DatasetError(f"{path}: unsupported channel count {arr.shape[2]}")
    return arr.transpose(2, 0, 1).astype(np.float64) * scale


def even_crop(x: np.ndarray, name: str = "") -> np.ndarray:
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        log.warning("%s: odd size %dx%d, dropping last row/column", name, h, w)
        x = x[..., : h - h % 2, : w - w % 2]
    return x


def ingest_dataset(directory) -> list[tuple[str, np.ndarray]]:
    """Sorted ``(name, image)`` pairs for every decodable image in ``directory``.

    Non-image and corrupt files are skipped with a warning; odd-sized
    images lose their last row/column.
    """
    images, _ = ingest_dataset_report(directory)
    return images


def ingest_dataset_report(directory):
    """Like :func:`ingest_dataset` but also returns ``[(name, reason)]`` for skipped files."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"{directory} is not a directory")
    images, skipped = [], []
    for path in sorted(directory.iterdir()):
        if not path.is_file():
            continue
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            if not path.name.endswith(".cfa.txt"):
                log.warning("skipping non-image file %s", path.name)
            continue
        try:
            x = read_image(path)
        except DatasetError as err:
            log.warning("skipping %s: %s", path.name, err)
            skipped.append((path.name, str(err)))
            continue
        if min(x.shape[1:]) < 2:
            skipped.append((path.name, "too small"))
            continue
        images.append((path.stem, even_crop(x, path.name)))
    if not images:
        raise DatasetError(f"no usable images in {directory}")
    return images, skipped


def write_rgb_png(path, x: np.ndarray) -> Path:
    """Quantize to uint8 and write an RGB PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    q = quantize(x).transpose(1, 2, 0)
    if not cv2.imwrite(str(path), cv2.cvtColor(q, cv2.COLOR_RGB2BGR)):
        raise DatasetError(f"failed to write {path}")
    return path


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".cfa.txt")


def write_cfa_png(path, y: CfaImage) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    v = np.clip(np.floor(y.samples * CFA_SCALE + 0.5), 0, 65535).astype(np.uint16)
    if not cv2.imwrite(str(path), v):
        raise DatasetError(f"failed to write {path}")
    _sidecar(path).write_text(f"rawpipe-cfa 1 pattern={y.pattern.value} scale={CFA_SCALE}\n")
    return path


def read_cfa_png(path, pattern=None) -> CfaImage:
    """Read a CFA container; ``pattern`` overrides a missing sidecar."""
    path = Path(path)
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None or arr.ndim != 2:
        raise DatasetError(f"{path}: not a single-channel CFA PNG")
    scale = CFA_SCALE
    meta = _sidecar(path)
    if meta.exists():
        fields = dict(tok.split("=", 1) for tok in meta.read_text().split() if "=" in tok)
        pattern = fields.get("pattern", pattern)
        scale = int(fields.get("scale", scale))
    if pattern is None:
        raise DatasetError(f"{path}: no sidecar and no pattern given")
    return CfaImage(arr.astype(np.float64) / scale, BayerPattern.parse(pattern))


DESK_SOURCES = ("astronaut", "chelsea", "coffee", "rocket", "immunohistochemistry", "hubble_deep_field")


def desk_corpus(n: int = 200, size: int = 64, seed: int = 0,
                sources=DESK_SOURCES) -> list[tuple[str, np.ndarray]]:
    """Fixed mini-corpus of ``n`` random ``size``-square crops of bundled sample images.

    Needs scikit-image (its bundled sample images); the crops are a pure
    function of ``(n, size, seed, sources)``.
    """
    from skimage import data as skdata

    if size % 2:
        raise ValueError("size must be even")
    pool = [getattr(skdata, s)()[..., :3].transpose(2, 0, 1).astype(np.float64) for s in sources]
    rng = np.random.default_rng([seed, 200])
    out = []
    for k in range(n):
        i = k % len(pool)
        im = pool[i]
        h, w = im.shape[1:]
        top = 2 * int(rng.integers(0, (h - size) // 2 + 1))
        left = 2 * int(rng.integers(0, (w - size) // 2 + 1))
        out.append((f"{sources[i]}_{k:03d}", im[:, top:top + size, left:left + size].copy()))
    return out
