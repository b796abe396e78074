"""Heatmap -> binary artifact mask: smoothing, bounded Otsu, close-then-open.

Morphology treats the map as embedded in an unbounded all-false background;
closing is evaluated on a canvas padded by the element radius so that it stays
extensive at the map border.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .filters import gaussian_blur


@dataclass(frozen=True)
class PostprocessConfig:
    v_min: float = 0.0
    v_max: float = 1.0
    sigma: float = 1.5
    bins: int = 256
    morph_radius: int = 1

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError(f"need v_min < v_max, got {self.v_min}, {self.v_max}")
        if self.sigma < 0 or self.bins < 2 or self.morph_radius < 0:
            raise ValueError("need sigma >= 0, bins >= 2, morph_radius >= 0")


@dataclass
class ArtifactMask:
    cells: np.ndarray
    threshold_used: float
    provenance: dict = field(default_factory=dict)


def gaussian_smooth(h: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0:
        return np.asarray(h, dtype=np.float64)
    return gaussian_blur(h, sigma)


def otsu_bounded(h: np.ndarray, cfg: PostprocessConfig) -> float:
    """Otsu threshold of the values clamped into ``[v_min, v_max]``.

    Candidates are interior bin edges; ties go to the lowest edge. If no edge
    splits the histogram into two non-empty classes, ``v_max`` is returned.
    """
    vals = np.clip(np.asarray(h, dtype=np.float64).ravel(), cfg.v_min, cfg.v_max)
    counts, edges = np.histogram(vals, bins=cfg.bins, range=(cfg.v_min, cfg.v_max))
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = counts.sum()
    w0 = np.cumsum(counts)[:-1]  # class 0 = bins [0, k) for edge k = 1..bins-1
    w1 = total - w0
    s0 = np.cumsum(counts * centers)[:-1]
    s1 = (counts * centers).sum() - s0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return float(cfg.v_max)
    with np.errstate(invalid="ignore", divide="ignore"):
        between = np.where(valid, w0 * w1 * (s0 / w0 - s1 / w1) ** 2, -1.0)
    # lowest edge within roundoff of the best, so exact ties go low
    k = int(np.argmax(between >= between.max() * (1 - 1e-12)))
    return float(edges[k + 1])


def _square_max(m: np.ndarray, radius: int) -> np.ndarray:
    """Max over a (2r+1)^2 window with false outside the array."""
    out = m
    for axis in (0, 1):
        n = out.shape[axis]
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, constant_values=False)
        acc = np.zeros_like(out)
        for k in range(2 * radius + 1):
            acc |= np.take(padded, np.arange(k, k + n), axis=axis)
        out = acc
    return out


def dilate(m: np.ndarray, radius: int) -> np.ndarray:
    m = np.asarray(m, dtype=bool)
    return m.copy() if radius == 0 else _square_max(m, radius)


def erode(m: np.ndarray, radius: int) -> np.ndarray:
    """Erosion with false outside the map, so border-adjacent cells erode."""
    m = np.asarray(m, dtype=bool)
    if radius == 0:
        return m.copy()
    padded = np.pad(m, radius, constant_values=False)
    inner = ~_square_max(~padded, radius)
    return inner[radius:-radius, radius:-radius]


def opening(m: np.ndarray, radius: int) -> np.ndarray:
    return dilate(erode(m, radius), radius)


def closing(m: np.ndarray, radius: int) -> np.ndarray:
    m = np.asarray(m, dtype=bool)
    if radius == 0:
        return m.copy()
    padded = np.pad(m, radius, constant_values=False)
    closed = erode(dilate(padded, radius), radius)
    return closed[radius:-radius, radius:-radius]


def morph_close_open(m, radius: int):
    """Closing then opening; accepts a boolean array or an ``ArtifactMask``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if isinstance(m, ArtifactMask):
        return ArtifactMask(morph_close_open(m.cells, radius), m.threshold_used,
                            dict(m.provenance))
    return opening(closing(m, radius), radius)


def binarize(h: np.ndarray, cfg: PostprocessConfig) -> ArtifactMask:
    smoothed = gaussian_smooth(h, cfg.sigma)
    thr = otsu_bounded(smoothed, cfg)
    cells = morph_close_open(smoothed > thr, cfg.morph_radius)
    return ArtifactMask(cells, thr, asdict(cfg))


def calibrate_bounds(clean_heatmaps, sigma: float = 1.5, lo_quantile: float = 0.95,
                     hi_factor: float = 3.0) -> tuple[float, float]:
    """Derive ``(v_min, v_max)`` from smoothed heatmaps of clean images.

    ``v_min`` is a high quantile of clean cell scores, so most clean cells clamp
    to the bottom bin; ``v_max`` sits ``hi_factor`` times further above the
    clean median.
    """
    vals = np.concatenate([gaussian_smooth(h, sigma).ravel() for h in clean_heatmaps])
    med = float(np.median(vals))
    v_min = float(np.quantile(vals, lo_quantile))
    v_max = v_min + hi_factor * max(v_min - med, 1e-12)
    return v_min, v_max


def expand_mask(cells: np.ndarray, image_dims: tuple[int, int], scale: int = 8) -> np.ndarray:
    """Upsample a cell mask to pixels; ragged edge pixels stay false."""
    full = np.kron(cells.astype(np.uint8), np.ones((scale, scale), dtype=np.uint8)).astype(bool)
    out = np.zeros(image_dims, dtype=bool)
    rows, cols = min(full.shape[0], image_dims[0]), min(full.shape[1], image_dims[1])
    out[:rows, :cols] = full[:rows, :cols]
    return out
