"""Orthonormal 2-D discrete wavelet transforms with periodic boundaries.

Coefficients use the usual in-place quadrant layout: after each level the
top-left quadrant holds the approximation (LL) and is transformed again.
Within a level, rows are transformed first (low half left, high half right),
then columns (low half top, high half bottom).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from hullgap.errors import InputError


class Family(str, Enum):
    HAAR = "haar"
    DAUBECHIES4 = "db4"


_SQ2 = math.sqrt(2.0)
_SQ3 = math.sqrt(3.0)

LOWPASS = {
    Family.HAAR: np.array([1.0, 1.0]) / _SQ2,
    Family.DAUBECHIES4: np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4 * _SQ2),
}


def _highpass(h: np.ndarray) -> np.ndarray:
    # quadrature mirror: g[m] = (-1)^m h[L-1-m]
    signs = np.where(np.arange(h.size) % 2 == 0, 1.0, -1.0)
    return signs * h[::-1]


@dataclass(frozen=True)
class WaveletSpec:
    family: Family = Family.HAAR
    levels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.levels < 1:
            raise InputError("levels must be >= 1")

    def check_shape(self, shape) -> None:
        h, w = shape[:2]
        block = 2 ** self.levels
        if h % block or w % block:
            raise InputError(
                f"image sides {h}x{w} are not divisible by 2**levels = {block}")


@dataclass(frozen=True)
class CoeffImage:
    coefficients: np.ndarray
    spec: WaveletSpec


def _analysis(x: np.ndarray, h: np.ndarray, axis: int) -> np.ndarray:
    """One analysis step along ``axis``: ``[low | high]`` halves."""
    x = np.moveaxis(x, axis, 0)
    n = x.shape[0]
    g = _highpass(h)
    base = 2 * np.arange(n // 2)
    low = np.zeros((n // 2,) + x.shape[1:])
    high = np.zeros_like(low)
    for m in range(h.size):
        tap = x[(base + m) % n]
        low += h[m] * tap
        high += g[m] * tap
    return np.moveaxis(np.concatenate([low, high]), 0, axis)


def _synthesis(c: np.ndarray, h: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(c, axis, 0)
    n = c.shape[0]
    g = _highpass(h)
    low, high = c[: n // 2], c[n // 2:]
    base = 2 * np.arange(n // 2)
    x = np.zeros_like(c)
    for m in range(h.size):
        # transpose of the analysis operator; np.add.at handles wraparound
        np.add.at(x, (base + m) % n, h[m] * low + g[m] * high)
    return np.moveaxis(x, 0, axis)


def dwt2(image, spec: WaveletSpec = WaveletSpec()) -> CoeffImage:
    """Multi-level separable 2-D DWT.  Channels (last axis of a 3-D array)
    are transformed independently."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise InputError(f"expected an h x w or h x w x c image, got shape {x.shape}")
    spec.check_shape(x.shape)
    h = LOWPASS[spec.family]
    out = x.copy()
    rows, cols = x.shape[:2]
    for _ in range(spec.levels):
        block = out[:rows, :cols]
        block = _analysis(block, h, axis=1)
        block = _analysis(block, h, axis=0)
        out[:rows, :cols] = block
        rows //= 2
        cols //= 2
    return CoeffImage(out, spec)


def idwt2(coeffs: CoeffImage) -> np.ndarray:
    """Inverse of :func:`dwt2`."""
    c = np.asarray(coeffs.coefficients, dtype=np.float64)
    spec = coeffs.spec
    if c.ndim not in (2, 3):
        raise InputError(f"malformed coefficient array of shape {c.shape}")
    spec.check_shape(c.shape)
    h = LOWPASS[spec.family]
    out = c.copy()
    for level in reversed(range(spec.levels)):
        rows = c.shape[0] >> level
        cols = c.shape[1] >> level
        block = out[:rows, :cols]
        block = _synthesis(block, h, axis=0)
        block = _synthesis(block, h, axis=1)
        out[:rows, :cols] = block
    return out


def transform_rows(data, shape, spec: WaveletSpec) -> np.ndarray:
    """Apply :func:`dwt2` to every flattened image row of ``data``.

    ``shape`` is ``(height, width, channels)``; flattened rows are read in
    the layout of that shape and the coefficients are flattened the same
    way, so each channel's coefficients occupy the same positions its pixels
    did.
    """
    data = np.asarray(data, dtype=np.float64)
    hgt, wid, ch = shape
    imgs = data.reshape(-1, ch, hgt, wid) if ch > 1 else data.reshape(-1, hgt, wid, 1)
    if ch > 1:
        # channel-planar rows (CIFAR layout) -> h x w x c
        imgs = imgs.transpose(0, 2, 3, 1)
    out = np.empty_like(imgs)
    for i, img in enumerate(imgs):
        out[i] = dwt2(img, spec).coefficients
    if ch > 1:
        out = out.transpose(0, 3, 1, 2)
    return out.reshape(data.shape[0], -1)


def select_coefficients(training, k: int) -> np.ndarray:
    """Indices of the ``k`` coefficients with largest mean absolute value.

    ``training`` holds one flattened coefficient vector per row.  Ties go to
    the lower flat index; the result is sorted ascending.
    """
    T = np.asarray(training, dtype=np.float64)
    if T.ndim == 1:
        T = T[None, :]
    d = T.shape[1]
    if not 1 <= k <= d:
        raise InputError(f"k must be in [1, {d}], got {k}")
    score = np.mean(np.abs(T), axis=0)
    order = np.argsort(-score, kind="stable")
    return np.sort(order[:k])


def flatten(coeffs: CoeffImage) -> np.ndarray:
    """Flatten a coefficient image with channels concatenated (planar)."""
    c = coeffs.coefficients
    if c.ndim == 3:
        c = c.transpose(2, 0, 1)
    return c.reshape(-1)


def apply_selection(coeffs, index_set) -> np.ndarray:
    """Keep the selected coefficient positions.

    ``coeffs`` is a :class:`CoeffImage`, one flattened vector, or a matrix of
    flattened vectors (one per row).
    """
    idx = np.asarray(index_set)
    if isinstance(coeffs, CoeffImage):
        return flatten(coeffs)[idx]
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim not in (1, 2):
        raise InputError("expected a flattened vector or a matrix of flattened rows")
    return c[..., idx]
