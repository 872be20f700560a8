"""Bayer pattern geometry, mosaicking, masks and seeded Gaussian noise.

Images are float64 on the nominal 0-255 scale.  A full color image is a
planar array of shape ``(3, H, W)`` (channel order R, G, B); a CFA image is
a single ``(H, W)`` plane bundled with its :class:`BayerPattern`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

R, G, B = 0, 1, 2


class DimensionError(ValueError):
    """Raised when an image cannot be tiled by whole 2x2 Bayer cells."""


class BayerPattern(enum.Enum):
    """The four phases of the Bayer tiling, named by the top-left 2x2 cell."""

    RGGB = "RGGB"
    GRBG = "GRBG"
    GBRG = "GBRG"
    BGGR = "BGGR"

    @classmethod
    def parse(cls, name: "str | BayerPattern") -> "BayerPattern":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ValueError(f"unknown Bayer pattern {name!r}") from None

    @property
    def cell(self) -> np.ndarray:
        """2x2 array of channel indices for the top-left cell."""
        lut = {"R": R, "G": G, "B": B}
        return np.array([lut[c] for c in self.value]).reshape(2, 2)

    def channel_at(self, row: int, col: int) -> int:
        return int(self.cell[row % 2, col % 2])

    def red_phase(self) -> tuple[int, int]:
        """(row, col) parity of the red samples."""
        r, c = np.argwhere(self.cell == R)[0]
        return int(r), int(c)

    def shifted(self, drow: int, dcol: int) -> "BayerPattern":
        """Pattern seen by an image translated by (drow, dcol) pixels.

        If ``x2[i, j] = x[i - drow, j - dcol]`` then mosaicking ``x2`` with
        the returned pattern equals translating the mosaic of ``x``.
        """
        cell = np.roll(self.cell, (drow % 2, dcol % 2), axis=(0, 1))
        name = "".join("RGB"[c] for c in cell.ravel())
        return BayerPattern(name)


def _check_dims(h: int, w: int) -> None:
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise DimensionError(f"CFA dimensions must be even and >= 2, got {h}x{w}")


@dataclass(frozen=True)
class CfaImage:
    """Single-channel mosaic plus the pattern it was sampled with."""

    samples: np.ndarray
    pattern: BayerPattern = BayerPattern.RGGB

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2:
            raise DimensionError(f"CFA samples must be 2-D, got shape {s.shape}")
        _check_dims(*s.shape)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "pattern", BayerPattern.parse(self.pattern))

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def mask(self) -> "CfaMask":
        return make_mask(self.pattern, *self.shape)

    def embed(self) -> np.ndarray:
        """Place each sample in its own color plane; zeros elsewhere."""
        return self.mask().planes * self.samples[None]


@dataclass(frozen=True)
class CfaMask:
    """Binary planes ``(3, H, W)``; exactly one plane is set at each pixel."""

    planes: np.ndarray

    @property
    def inverse(self) -> np.ndarray:
        return 1.0 - self.planes

    @property
    def red(self) -> np.ndarray:
        return self.planes[R]

    @property
    def green(self) -> np.ndarray:
        return self.planes[G]

    @property
    def blue(self) -> np.ndarray:
        return self.planes[B]


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def make_mask(pattern, h: int, w: int) -> CfaMask:
    pattern = BayerPattern.parse(pattern)
    _check_dims(h, w)
    idx = np.tile(pattern.cell, (h // 2, w // 2))
    planes = np.stack([(idx == c) for c in (R, G, B)]).astype(np.float64)
    return CfaMask(planes)


def _as_rgb(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3:
        raise DimensionError(f"expected a (3, H, W) image, got shape {x.shape}")
    return x


def mosaic(x, pattern=BayerPattern.RGGB) -> CfaImage:
    """Sample a full color image through the Bayer mask."""
    x = _as_rgb(x)
    m = make_mask(pattern, *x.shape[1:])
    # exact pick, no arithmetic on the sampled value
    idx = np.argmax(m.planes, axis=0)
    samples = np.take_along_axis(x, idx[None], axis=0)[0]
    return CfaImage(samples, BayerPattern.parse(pattern))


def add_noise(y: CfaImage, spec: NoiseSpec) -> CfaImage:
    """Add i.i.d. N(0, sigma^2) noise; no clipping.

    Uses numpy's PCG64 generator seeded with ``spec.seed`` so the same
    (seed, sigma, shape) always yields the same output.
    """
    if spec.sigma == 0:
        return CfaImage(y.samples.copy(), y.pattern)
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(y.shape) * spec.sigma
    return CfaImage(y.samples + noise, y.pattern)


def apply_mask(x, m: CfaMask) -> np.ndarray:
    x = _as_rgb(x)
    if x.shape != m.planes.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {m.planes.shape}")
    return x * m.planes


def compose(a, b, m: CfaMask) -> np.ndarray:
    """``m .* a + (1 - m) .* b`` per channel, selecting rather than blending.

    Selection keeps retained values bit-exact even when ``b`` holds
    non-finite or huge values.
    """
    a, b = _as_rgb(a), _as_rgb(b)
    if a.shape != b.shape or a.shape != m.planes.shape:
        raise DimensionError(f"shape mismatch {a.shape}, {b.shape}, {m.planes.shape}")
    return np.where(m.planes > 0.5, a, b)
