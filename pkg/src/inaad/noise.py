"""Seeded 2-D noise fields: Gaussian, pyramid, and simplex.

Every generator is a pure function of (shape, seed, params): the same seed
reproduces the same field bit-for-bit. Pyramid and simplex fields are
re-standardized to zero mean / unit standard deviation per sample so that
the forward diffusion mixes comparable noise energy regardless of the
distribution in use; raw i.i.d. Gaussian fields already satisfy this in
expectation and are left untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .seeding import make_rng

__all__ = [
    "PyramidParams",
    "SimplexParams",
    "NoiseKind",
    "sample_gaussian",
    "sample_pyramid",
    "sample_simplex",
    "make_sampler",
]

NoiseKind = Literal["gaussian", "pyramid", "simplex"]

# Sampler signature shared by all generators once parameters are bound.
NoiseSampler = Callable[[int, int, int], np.ndarray]


@dataclass(frozen=True)
class PyramidParams:
    """Multi-scale Gaussian pyramid: ``levels`` dyadically coarser fields,
    bilinearly upscaled and weighted by ``scale**i`` for level i = 1..levels."""

    levels: int = 10
    scale: float = 0.8

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError("scale must lie in (0, 1]")


@dataclass(frozen=True)
class SimplexParams:
    """Octave-summed simplex noise: octave k is sampled at frequency
    ``start_frequency * 2**k`` with amplitude ``decay**k``."""

    start_frequency: float = 2.0 ** -6
    octaves: int = 6
    decay: float = 0.8

    def __post_init__(self):
        if self.start_frequency <= 0.0:
            raise ValueError("start_frequency must be positive")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")


def _check_shape(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise ValueError(f"field dimensions must be >= 1, got {height}x{width}")


def _standardize(field: np.ndarray) -> np.ndarray:
    std = field.std()
    if std == 0.0:
        return np.zeros_like(field)
    return (field - field.mean()) / std


def sample_gaussian(height: int, width: int, seed: int) -> np.ndarray:
    """I.i.d. standard normal field."""
    _check_shape(height, width)
    rng = make_rng(seed)
    return rng.standard_normal((height, width))


def _bilinear_upscale(field: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-centre alignment."""
    in_h, in_w = field.shape
    if (in_h, in_w) == (out_h, out_w):
        return field

    def _axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    r0, r1, fr = _axis_coords(in_h, out_h)
    c0, c1, fc = _axis_coords(in_w, out_w)
    fr = fr[:, None]
    fc = fc[None, :]
    top = field[np.ix_(r0, c0)] * (1.0 - fc) + field[np.ix_(r0, c1)] * fc
    bottom = field[np.ix_(r1, c0)] * (1.0 - fc) + field[np.ix_(r1, c1)] * fc
    return top * (1.0 - fr) + bottom * fr


def sample_pyramid(height: int, width: int, seed: int,
                   params: PyramidParams = PyramidParams()) -> np.ndarray:
    """Weighted sum of upscaled Gaussian fields at dyadic resolutions.

    Level i (1-based) draws an i.i.d. Gaussian field of size
    ceil(H / 2**(i-1)) x ceil(W / 2**(i-1)), upscales it to H x W and adds
    it with weight scale**i. Levels stop early once 1x1 is reached. The sum
    is standardized to zero mean / unit std.
    """
    _check_shape(height, width)
    rng = make_rng(seed)
    total = np.zeros((height, width))
    for i in range(1, params.levels + 1):
        h_i = max(1, math.ceil(height / 2 ** (i - 1)))
        w_i = max(1, math.ceil(width / 2 ** (i - 1)))
        level = rng.standard_normal((h_i, w_i))
        total += params.scale ** i * _bilinear_upscale(level, height, width)
        if h_i == 1 and w_i == 1:
            break
    return _standardize(total)


# Classic 2-D simplex lattice constants and gradient table.
_F2 = 0.5 * (math.sqrt(3.0) - 1.0)
_G2 = (3.0 - math.sqrt(3.0)) / 6.0
_GRAD2 = np.array(
    [[1, 1], [-1, 1], [1, -1], [-1, -1],
     [1, 0], [-1, 0], [1, 0], [-1, 0],
     [0, 1], [0, -1], [0, 1], [0, -1]],
    dtype=np.float64,
)


def _simplex_grid(x: np.ndarray, y: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Vectorized single-octave simplex noise over coordinate arrays."""
    s = (x + y) * _F2
    i = np.floor(x + s).astype(np.int64)
    j = np.floor(y + s).astype(np.int64)
    t = (i + j) * _G2
    x0 = x - (i - t)
    y0 = y - (j - t)

    # Which simplex triangle of the cell the point falls in.
    upper = x0 > y0
    i1 = upper.astype(np.int64)
    j1 = 1 - i1

    x1 = x0 - i1 + _G2
    y1 = y0 - j1 + _G2
    x2 = x0 - 1.0 + 2.0 * _G2
    y2 = y0 - 1.0 + 2.0 * _G2

    ii = i & 255
    jj = j & 255
    gi0 = perm[(ii + perm[jj]) & 255] % 12
    gi1 = perm[(ii + i1 + perm[(jj + j1) & 255]) & 255] % 12
    gi2 = perm[(ii + 1 + perm[(jj + 1) & 255]) & 255] % 12

    out = np.zeros_like(x)
    for gi, cx, cy in ((gi0, x0, y0), (gi1, x1, y1), (gi2, x2, y2)):
        falloff = 0.5 - cx * cx - cy * cy
        np.maximum(falloff, 0.0, out=falloff)
        falloff *= falloff
        falloff *= falloff
        grad = _GRAD2[gi]
        out += falloff * (grad[..., 0] * cx + grad[..., 1] * cy)
    return 70.0 * out


def sample_simplex(height: int, width: int, seed: int,
                   params: SimplexParams = SimplexParams()) -> np.ndarray:
    """Octave-summed simplex gradient noise, standardized per field.

    The permutation table is shuffled from the seed; each octave samples the
    pixel grid at a doubled frequency with geometrically decaying amplitude,
    from a seed-derived random lattice offset.
    """
    _check_shape(height, width)
    rng = make_rng(seed)
    perm = rng.permutation(256).astype(np.int64)
    offsets = rng.uniform(0.0, 256.0, size=(params.octaves, 2))

    cols = np.arange(width, dtype=np.float64)[None, :]
    rows = np.arange(height, dtype=np.float64)[:, None]
    total = np.zeros((height, width))
    for k in range(params.octaves):
        freq = params.start_frequency * 2.0 ** k
        x = cols * freq + offsets[k, 0]
        y = rows * freq + offsets[k, 1]
        total += params.decay ** k * _simplex_grid(
            np.broadcast_to(x, (height, width)).copy(),
            np.broadcast_to(y, (height, width)).copy(),
            perm,
        )
    return _standardize(total)


def make_sampler(kind: NoiseKind,
                 pyramid: PyramidParams = PyramidParams(),
                 simplex: SimplexParams = SimplexParams()) -> NoiseSampler:
    """Bind generator parameters and return a (height, width, seed) sampler."""
    if kind == "gaussian":
        return sample_gaussian
    if kind == "pyramid":
        return lambda h, w, seed: sample_pyramid(h, w, seed, pyramid)
    if kind == "simplex":
        return lambda h, w, seed: sample_simplex(h, w, seed, simplex)
    raise ValueError(f"unknown noise kind: {kind!r}")
