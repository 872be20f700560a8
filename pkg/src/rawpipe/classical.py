"""Classical Bayer demosaickers: bilinear, Hamilton-Adams and GBTF.

All three return a ``(3, H, W)`` float64 image that agrees bit-exactly with
the CFA input at every sampled position.  Borders are handled by mirror
padding the mosaic (``np.pad(..., mode="reflect")``), which preserves the
Bayer phase; the stencils are then evaluated with wrap-around shifts on the
padded canvas and the margin is cropped away.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import ndimage

from .cfa import B, G, R, CfaImage, make_mask

# weight stabilizer for flat regions
GBTF_EPS = 1e-10
# reach of the GBTF stencil chain is 11 pixels; keep the pad even
_GBTF_PAD = 12
_HA_PAD = 4

# R-at-B / B-at-R color-difference stencil (sum 32)
PRB = np.array(
    [
        [0, 0, -1, 0, -1, 0, 0],
        [0, 0, 0, 0, 0, 0, 0],
        [-1, 0, 10, 0, 10, 0, -1],
        [0, 0, 0, 0, 0, 0, 0],
        [-1, 0, 10, 0, 10, 0, -1],
        [0, 0, 0, 0, 0, 0, 0],
        [0, 0, -1, 0, -1, 0, 0],
    ],
    dtype=np.float64,
) / 32.0


class DemosaicMethod(enum.Enum):
    BILINEAR = "bilinear"
    HA = "ha"
    GBTF = "gbtf"

    @classmethod
    def parse(cls, name) -> "DemosaicMethod":
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        for m in cls:
            if m.value == key or m.name.lower() == key:
                return m
        raise ValueError(f"unknown demosaic method {name!r}")


def _sh(a: np.ndarray, di: int, dj: int) -> np.ndarray:
    """``out[i, j] = a[i + di, j + dj]`` with wrap-around."""
    return np.roll(a, (-di, -dj), axis=(0, 1))


def _padded(y: CfaImage, pad: int):
    s = np.pad(y.samples, pad, mode="reflect")
    m = make_mask(y.pattern, *y.shape).planes
    m = np.stack([np.pad(p, pad, mode="reflect") for p in m])
    return s, m


def _retain(y: CfaImage, x: np.ndarray) -> np.ndarray:
    m = y.mask().planes
    return np.where(m > 0.5, y.samples[None], x)


def _normconv(values: np.ndarray, mask: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    num = ndimage.correlate(values * mask, kernel, mode="constant")
    den = ndimage.correlate(mask, kernel, mode="constant")
    return num / den


_K_G = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.float64)
_K_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64)


def demosaic_bilinear(y: CfaImage) -> np.ndarray:
    """Average of the nearest same-channel samples (2 or 4 taps).

    Evaluated as a normalized convolution, so border pixels average only
    the neighbors that exist.
    """
    m = y.mask().planes
    s = y.samples
    out = np.empty((3,) + y.shape)
    out[G] = _normconv(s, m[G], _K_G)
    out[R] = _normconv(s, m[R], _K_RB)
    out[B] = _normconv(s, m[B], _K_RB)
    return _retain(y, out)


def _ha_green(s: np.ndarray, mg: np.ndarray) -> np.ndarray:
    """Hamilton-Adams green with gradient-selected direction."""
    west, east = _sh(s, 0, -1), _sh(s, 0, 1)
    north, south = _sh(s, -1, 0), _sh(s, 1, 0)
    lap_h = 2 * s - _sh(s, 0, -2) - _sh(s, 0, 2)
    lap_v = 2 * s - _sh(s, -2, 0) - _sh(s, 2, 0)
    gh = (west + east) / 2 + lap_h / 4
    gv = (north + south) / 2 + lap_v / 4
    dh = np.abs(west - east) + np.abs(lap_h)
    dv = np.abs(north - south) + np.abs(lap_v)
    g = np.where(dh < dv, gh, np.where(dv < dh, gv, (gh + gv) / 2))
    return np.where(mg > 0.5, s, g)


def demosaic_ha(y: CfaImage) -> np.ndarray:
    """Hamilton-Adams green, then bilinear R/B in the color-difference domain."""
    p = _HA_PAD
    s, m = _padded(y, p)
    g = _ha_green(s, m[G])
    out = np.empty((3,) + s.shape)
    out[G] = g
    for c in (R, B):
        diff = _normconv(s - g, m[c], _K_RB)
        out[c] = g + diff
    out = out[:, p:-p, p:-p]
    return _retain(y, out)


def _directional_differences(s: np.ndarray, m: np.ndarray):
    """Dense horizontal and vertical G-minus-(R|B) fields from HA estimates."""
    mg = m[G] > 0.5
    h_est = (_sh(s, 0, -1) + _sh(s, 0, 1)) / 2 + (2 * s - _sh(s, 0, -2) - _sh(s, 0, 2)) / 4
    v_est = (_sh(s, -1, 0) + _sh(s, 1, 0)) / 2 + (2 * s - _sh(s, -2, 0) - _sh(s, 2, 0)) / 4
    # at green sites the estimate is the missing R/B, elsewhere it is G
    dh = np.where(mg, s - h_est, h_est - s)
    dv = np.where(mg, s - v_est, v_est - s)
    return dh, dv


def _window_sum(a: np.ndarray, rows: range, cols: range) -> np.ndarray:
    tmp = sum(_sh(a, 0, dj) for dj in cols)
    return sum(_sh(tmp, di, 0) for di in rows)


def gbtf_green_difference(s: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Weighted color-difference estimate G - X at every pixel (padded canvas).

    Only meaningful at R and B sites, where X is the sampled channel.
    """
    dh, dv = _directional_differences(s, m)
    grad_h = np.abs(_sh(dh, 0, -1) - _sh(dh, 0, 1))
    grad_v = np.abs(_sh(dv, -1, 0) - _sh(dv, 1, 0))

    band = range(-2, 3)
    w_n = 1.0 / (_window_sum(grad_v, range(-4, 1), band) ** 2 + GBTF_EPS)
    w_s = 1.0 / (_window_sum(grad_v, range(0, 5), band) ** 2 + GBTF_EPS)
    w_w = 1.0 / (_window_sum(grad_h, band, range(-4, 1)) ** 2 + GBTF_EPS)
    w_e = 1.0 / (_window_sum(grad_h, band, range(0, 5)) ** 2 + GBTF_EPS)

    est_n = sum(_sh(dv, di, 0) for di in range(-4, 1)) / 5
    est_s = sum(_sh(dv, di, 0) for di in range(0, 5)) / 5
    est_w = sum(_sh(dh, 0, dj) for dj in range(-4, 1)) / 5
    est_e = sum(_sh(dh, 0, dj) for dj in range(0, 5)) / 5

    total = w_n + w_s + w_w + w_e
    return (w_n * est_n + w_s * est_s + w_w * est_w + w_e * est_e) / total


def demosaic_gbtf(y: CfaImage) -> np.ndarray:
    """Gradient-based threshold-free demosaicking.

    Green at R/B sites is the sample plus a color difference fused from four
    directional averages, each weighted by the inverse square of the local
    color-difference gradient energy in that direction.  R at B (and B at R)
    applies a 7x7 diagonal stencil to the G-R (G-B) plane; R and B at green
    sites average the four neighboring color differences.
    """
    p = _GBTF_PAD
    s, m = _padded(y, p)
    mr, mg, mb = (m[c] > 0.5 for c in (R, G, B))

    delta = gbtf_green_difference(s, m)
    g = np.where(mg, s, s + delta)

    # G-R known at R sites, G-B at B sites
    d_gr = np.where(mr, delta, 0.0)
    d_gb = np.where(mb, delta, 0.0)
    d_gr = np.where(mb, ndimage.correlate(d_gr, PRB, mode="wrap"), d_gr)
    d_gb = np.where(mr, ndimage.correlate(d_gb, PRB, mode="wrap"), d_gb)

    cross = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.float64) / 4
    d_gr = np.where(mg, ndimage.correlate(d_gr, cross, mode="wrap"), d_gr)
    d_gb = np.where(mg, ndimage.correlate(d_gb, cross, mode="wrap"), d_gb)

    out = np.stack([g - d_gr, g, g - d_gb])[:, p:-p, p:-p]
    return _retain(y, out)


_DISPATCH = {
    DemosaicMethod.BILINEAR: demosaic_bilinear,
    DemosaicMethod.HA: demosaic_ha,
    DemosaicMethod.GBTF: demosaic_gbtf,
}


def demosaic(y: CfaImage, method="gbtf") -> np.ndarray:
    return _DISPATCH[DemosaicMethod.parse(method)](y)
