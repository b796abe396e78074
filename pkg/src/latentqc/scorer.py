"""Fixed-timestep noise-prediction error maps.

Heatmap file ``DQCH`` (little-endian): magic ``b"DQCH"``, version byte (1),
``u32`` H, ``u32`` W, then H*W ``f32`` values row-major.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import encode
from .denoiser import apply_adaptor, predict_noise
from .errors import DataError
from .modelfile import Model
from .rng import derive_seed, standard_normal
from .schedule import diffuse
from .tiler import TileGrid, plan, stitch

HEATMAP_MAGIC = b"DQCH"
HEATMAP_VERSION = 1
_HM_HEADER = struct.Struct("<4sBII")


@dataclass(frozen=True)
class InferenceConfig:
    t_star: int | None = None  # None -> ceil(0.8 T)
    draws: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be >= 1")

    def resolve_t_star(self, T: int) -> int:
        t = self.t_star if self.t_star is not None else math.ceil(0.8 * T)
        if not 1 <= t <= T:
            raise ValueError(f"t_star {t} outside 1..{T}")
        return t


def error_map(eps: np.ndarray, eps_hat: np.ndarray) -> np.ndarray:
    """Per-cell squared error averaged over the channel axis."""
    eps, eps_hat = np.asarray(eps), np.asarray(eps_hat)
    if eps.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: {eps.shape} vs {eps_hat.shape}")
    return np.mean((eps - eps_hat) ** 2, axis=-1)


def draw_seed(base: int, origin: tuple[int, int], k: int) -> int:
    return derive_seed(base, origin[0], origin[1], k)


def embed(model: Model, pixels: np.ndarray) -> np.ndarray:
    """Encoder output, passed through the adaptor for enhanced models."""
    z0 = encode(pixels, model.codec)
    return z0 if model.adaptor is None else apply_adaptor(model.adaptor, z0)


def score_latent(z0: np.ndarray, model: Model, cfg: InferenceConfig,
                 origin: tuple[int, int] = (0, 0), tie_draws: bool = False) -> np.ndarray:
    """Average the error map over ``cfg.draws`` seeded noise draws.

    ``tie_draws`` reuses the first draw's noise for every draw (test hook).
    """
    t = cfg.resolve_t_star(model.schedule.T)
    k_draws = cfg.draws
    eps = np.stack([
        standard_normal(draw_seed(cfg.seed, origin, 0 if tie_draws else k), z0.shape)
        for k in range(k_draws)
    ])
    z_t = diffuse(np.broadcast_to(z0, eps.shape), t, eps, model.schedule)
    eps_hat = predict_noise(model.params, z_t, t)
    return error_map(eps, eps_hat).mean(axis=0)


def score_patch(x: np.ndarray, model: Model, cfg: InferenceConfig,
                origin: tuple[int, int] = (0, 0), tie_draws: bool = False) -> np.ndarray:
    return score_latent(embed(model, x), model, cfg, origin, tie_draws)


def score_image(image: np.ndarray, model: Model, cfg: InferenceConfig,
                patch: int = 256, stride: int | None = None,
                jobs: int = 1) -> tuple[np.ndarray, TileGrid]:
    """Tile, score every patch and stitch a whole-image heatmap."""
    grid = plan(image.shape[:2], patch, stride)
    tiles = list(grid.extract(image))

    def work(item):
        origin, pixels = item
        return origin, score_patch(pixels, model, cfg, origin)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, tiles))
    else:
        results = [work(t) for t in tiles]
    return stitch(results, grid), grid


def heatmap_bytes(h: np.ndarray) -> bytes:
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError("heatmap must be 2-D")
    return (_HM_HEADER.pack(HEATMAP_MAGIC, HEATMAP_VERSION, h.shape[0], h.shape[1])
            + h.astype("<f4").tobytes())


def write_heatmap(path, h: np.ndarray) -> None:
    Path(path).write_bytes(heatmap_bytes(h))


def read_heatmap(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HM_HEADER.size:
        raise DataError(f"heatmap file {path} truncated")
    magic, version, h, w = _HM_HEADER.unpack_from(data)
    if magic != HEATMAP_MAGIC or version != HEATMAP_VERSION:
        raise DataError(f"{path} is not a DQCH v{HEATMAP_VERSION} heatmap")
    if len(data) != _HM_HEADER.size + 4 * h * w:
        raise DataError(f"heatmap file {path} has wrong payload size")
    return np.frombuffer(data, dtype="<f4", offset=_HM_HEADER.size).reshape(h, w).astype(np.float64)
