"""Sliding-window patch layout and stitching of per-patch heatmaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import BLOCK
from .errors import DataError


def _axis_origins(dim: int, patch: int, stride: int) -> list[int]:
    origins = list(range(0, dim - patch + 1, stride))
    if origins[-1] != dim - patch:
        origins.append(dim - patch)  # flush to the far edge
    return origins


@dataclass(frozen=True)
class TileGrid:
    """Row-major patch layout.

    ``origins`` are the flush-edge window positions; ``aligned`` floors each to
    a multiple of 8 pixels so latent cells line up across patches. Patches are
    extracted at the aligned origins; ``shifts`` records the difference.
    """

    image_dims: tuple[int, int]
    patch: int
    stride: int
    origins: tuple[tuple[int, int], ...]
    aligned: tuple[tuple[int, int], ...]

    @property
    def shifts(self) -> tuple[tuple[int, int], ...]:
        return tuple((r - ar, c - ac) for (r, c), (ar, ac) in zip(self.origins, self.aligned))

    @property
    def cell_dims(self) -> tuple[int, int]:
        return self.image_dims[0] // BLOCK, self.image_dims[1] // BLOCK

    def extract(self, image: np.ndarray):
        """Yield ``(aligned_origin, patch_pixels)`` in layout order."""
        for r, c in self.aligned:
            yield (r, c), image[r:r + self.patch, c:c + self.patch]


def plan(image_dims: tuple[int, int], patch: int = 256, stride: int | None = None) -> TileGrid:
    rows, cols = (int(d) for d in image_dims)
    stride = patch if stride is None else int(stride)
    if patch % BLOCK or patch <= 0:
        raise ValueError(f"patch size must be a positive multiple of {BLOCK}")
    if not 1 <= stride <= patch:
        raise ValueError("stride must lie in 1..patch")
    if rows < patch or cols < patch:
        raise DataError(f"image {rows}x{cols} is smaller than the {patch}px patch")
    origins, aligned = [], []
    for r in _axis_origins(rows, patch, stride):
        for c in _axis_origins(cols, patch, stride):
            a = (r // BLOCK * BLOCK, c // BLOCK * BLOCK)
            if a in aligned:
                continue
            origins.append((r, c))
            aligned.append(a)
    return TileGrid((rows, cols), patch, stride, tuple(origins), tuple(aligned))


def stitch(heatmaps, grid: TileGrid) -> np.ndarray:
    """Average per-patch heatmaps (8 px per cell) into a full-image heatmap.

    ``heatmaps`` is an iterable of ``(origin, heatmap)``; origins may be the
    grid's flush or aligned origins and are floored to whole cells.
    """
    h, w = grid.cell_dims
    total = np.zeros((h, w))
    count = np.zeros((h, w), dtype=np.int64)
    expected = set(grid.aligned)
    seen = set()
    for (r, c), hm in heatmaps:
        hm = np.asarray(hm, dtype=np.float64)
        cr, cc = r // BLOCK, c // BLOCK
        seen.add((cr * BLOCK, cc * BLOCK))
        if cr + hm.shape[0] > h or cc + hm.shape[1] > w:
            raise DataError(f"heatmap at origin {(r, c)} extends past the image")
        total[cr:cr + hm.shape[0], cc:cc + hm.shape[1]] += hm
        count[cr:cr + hm.shape[0], cc:cc + hm.shape[1]] += 1
    missing = expected - seen
    if missing:
        raise DataError(f"missing heatmaps for patch origins {sorted(missing)}")
    if (count == 0).any():
        raise DataError("stitched heatmap has uncovered cells")
    return total / count
