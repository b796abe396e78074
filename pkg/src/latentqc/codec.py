"""Frozen block-projection encoder: RGB patch -> 8x-downsampled latent grid.

Each 8x8x3 pixel block is mapped affinely from [0, 1] to [-1, 1], flattened in
(row, col, channel) order to a 192-vector and projected onto ``channels``
orthonormal directions. Latent cell (i, j) depends only on block (i, j).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rng import standard_normal

BLOCK = 8


@dataclass(frozen=True)
class CodecConfig:
    channels: int = 4
    projection_seed: int = 0
    block: int = BLOCK

    def __post_init__(self):
        if self.block != BLOCK:
            raise ValueError(f"codec block size is fixed at {BLOCK}")
        if not 1 <= self.channels <= self.block_dim:
            raise ValueError(f"channels must be in 1..{self.block_dim}")

    @property
    def block_dim(self) -> int:
        return self.block * self.block * 3

    @cached_property
    def projection(self) -> np.ndarray:
        """``block_dim x channels`` matrix with orthonormal columns."""
        gauss = standard_normal(self.projection_seed, (self.block_dim, self.channels))
        q, _ = np.linalg.qr(gauss)
        for c in range(q.shape[1]):
            nz = np.flatnonzero(q[:, c])
            if q[nz[0], c] < 0:
                q[:, c] = -q[:, c]
        q.flags.writeable = False
        return q


def blocks(pixels: np.ndarray, block: int = BLOCK) -> np.ndarray:
    """Rearrange ``(..., H0, W0, 3)`` pixels into ``(..., H, W, block*block*3)``."""
    *lead, h0, w0, ch = pixels.shape
    if ch != 3:
        raise ValueError(f"expected 3 colour channels, got {ch}")
    if h0 % block or w0 % block:
        raise ValueError(f"patch dims {h0}x{w0} are not multiples of {block}")
    h, w = h0 // block, w0 // block
    x = pixels.reshape(*lead, h, block, w, block, ch)
    x = np.moveaxis(x, -4, -3)  # (..., h, w, block, block, ch)
    return x.reshape(*lead, h, w, block * block * ch)


def encode(pixels: np.ndarray, cfg: CodecConfig) -> np.ndarray:
    """Encode one patch ``(H0, W0, 3)`` or a batch ``(N, H0, W0, 3)``."""
    x = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    v = 2.0 * blocks(x, cfg.block) - 1.0
    return v @ cfg.projection
