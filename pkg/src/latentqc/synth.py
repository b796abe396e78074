"""Procedural clean tissue-like textures and four synthetic artifact types.

Everything is a pure function of the integer seed, so whole corpora can be
regenerated byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filters import gaussian_blur
from .rng import derive_seed

ARTIFACT_TYPES = ("oof", "penmark", "fold", "bubble")

BACKGROUND = np.array([0.96, 0.88, 0.93])
EOSIN = np.array([0.88, 0.52, 0.70])
HEMATOXYLIN = np.array([0.36, 0.20, 0.52])
PEN_COLOURS = np.array([
    [0.10, 0.20, 0.75],
    [0.05, 0.55, 0.20],
    [0.08, 0.08, 0.10],
    [0.80, 0.10, 0.15],
])


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    size: int = 256
    train_count: int = 200
    artifact_count: int = 40
    test_count: int = 100
    test_clean_fraction: float = 0.5
    mix: dict = field(default_factory=lambda: {t: 0.25 for t in ARTIFACT_TYPES})
    area: tuple[float, float] = (0.08, 0.30)

    def __post_init__(self):
        unknown = set(self.mix) - set(ARTIFACT_TYPES)
        if unknown:
            raise ValueError(f"unknown artifact types in mix: {sorted(unknown)}")
        if any(v < 0 for v in self.mix.values()) or not np.isclose(sum(self.mix.values()), 1.0):
            raise ValueError("artifact mix proportions must be non-negative and sum to 1")
        lo, hi = self.area
        if not 0 < lo <= hi < 1:
            raise ValueError("need 0 < a_lo <= a_hi < 1")
        if self.size % 8 or self.size < 8:
            raise ValueError("size must be a positive multiple of 8")

    def mix_vector(self) -> np.ndarray:
        return np.array([self.mix.get(t, 0.0) for t in ARTIFACT_TYPES])


@dataclass
class LabeledSample:
    image: np.ndarray
    type_masks: dict[str, np.ndarray]
    seed: int
    kind: str

    @property
    def union_mask(self) -> np.ndarray:
        out = np.zeros(self.image.shape[:2], dtype=bool)
        for m in self.type_masks.values():
            out |= m
        return out


def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(size: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Lattice value noise with quintic interpolation, values in [0, 1]."""
    cells = int(np.ceil(size / scale)) + 2
    grid = rng.random((cells, cells))
    coords = np.arange(size) / scale + rng.random()
    i = np.floor(coords).astype(int)
    f = _fade(coords - i)
    fy, fx = f[:, None], f[None, :]
    iy, ix = i[:, None], i[None, :]
    v00, v01 = grid[iy, ix], grid[iy, ix + 1]
    v10, v11 = grid[iy + 1, ix], grid[iy + 1, ix + 1]
    top = v00 + fx * (v01 - v00)
    bottom = v10 + fx * (v11 - v10)
    return top + fy * (bottom - top)


def fbm(size: int, rng: np.random.Generator, base_scale: float = 64.0,
        octaves: int = 5, persistence: float = 0.55) -> np.ndarray:
    total = np.zeros((size, size))
    amp, norm, scale = 1.0, 0.0, base_scale
    for _ in range(octaves):
        total += amp * value_noise(size, max(scale, 1.0), rng)
        norm += amp
        amp *= persistence
        scale /= 2.0
    return total / norm


def _ellipse_field(size, cy, cx, ry, rx, theta):
    """Normalised elliptical radius (1 on the boundary) over the full grid."""
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = y - cy, x - cx
    c, s = np.cos(theta), np.sin(theta)
    u = (c * dx + s * dy) / rx
    v = (-s * dx + c * dy) / ry
    return np.sqrt(u * u + v * v)


def gen_clean(seed: int, size: int = 256) -> np.ndarray:
    """Pink/purple stroma texture sprinkled with soft elliptical nuclei."""
    if size % 8 or size < 8:
        raise ValueError("size must be a positive multiple of 8")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0xC1EA)))
    density = np.clip((fbm(size, rng) - 0.3) / 0.45, 0.0, 1.0)
    img = BACKGROUND + density[..., None] * (EOSIN - BACKGROUND)
    fibre = fbm(size, rng, base_scale=6.0, octaves=2)
    img = img - 0.12 * (fibre[..., None] - 0.5) * density[..., None]

    n_nuclei = rng.poisson(70 * (size / 256) ** 2)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(n_nuclei):
        cy, cx = rng.random(2) * size
        r = rng.uniform(3.0, 7.0)
        ry, rx = r, r * rng.uniform(0.6, 1.0)
        theta = rng.uniform(0, np.pi)
        y0, y1 = int(max(cy - r - 3, 0)), int(min(cy + r + 4, size))
        x0, x1 = int(max(cx - r - 3, 0)), int(min(cx + r + 4, size))
        if y0 >= y1 or x0 >= x1:
            continue
        dy, dx = y[y0:y1, x0:x1] - cy, x[y0:y1, x0:x1] - cx
        c, s = np.cos(theta), np.sin(theta)
        rad = np.hypot((c * dx + s * dy) / rx, (-s * dx + c * dy) / ry)
        alpha = 0.85 * np.clip((1.25 - rad) / 0.5, 0.0, 1.0)[..., None]
        shade = HEMATOXYLIN * rng.uniform(0.85, 1.15)
        img[y0:y1, x0:x1] = (1 - alpha) * img[y0:y1, x0:x1] + alpha * shade

    img = img + 0.015 * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)


def _fit_area(make_mask, target: float, lo_s: float, hi_s: float, size: int):
    """Bisect a monotone scale parameter so the mask covers ``target`` of the image."""
    total = size * size
    mask = make_mask(hi_s)
    for _ in range(40):
        mid = 0.5 * (lo_s + hi_s)
        m = make_mask(mid)
        frac = m.sum() / total
        if frac < target:
            lo_s = mid
        else:
            hi_s, mask = mid, m
    return mask


def _segment_distance(y, x, p, q):
    d = q - p
    denom = float(d @ d) or 1.0
    tt = np.clip(((y - p[0]) * d[0] + (x - p[1]) * d[1]) / denom, 0.0, 1.0)
    return np.hypot(y - (p[0] + tt * d[0]), x - (p[1] + tt * d[1]))


def _oof(clean, rng, target, size):
    cy, cx = rng.uniform(0.25, 0.75, 2) * size
    aspect = rng.uniform(0.6, 1.0)
    theta = rng.uniform(0, np.pi)

    def region(r):
        return _ellipse_field(size, cy, cx, r * aspect, r, theta) < 1.0

    mask = _fit_area(region, target, 1.0, 2.0 * size, size)
    rad = np.sqrt(mask.sum() / (np.pi * aspect))
    field_ = _ellipse_field(size, cy, cx, rad * aspect, rad, theta)
    alpha = np.clip((1.0 - field_) / 0.25, 0.0, 1.0)
    alpha[~mask] = 0.0
    blurred = gaussian_blur(clean, 4.0)
    out = clean + alpha[..., None] * (blurred - clean)
    mask = alpha > 0
    return np.where(mask[..., None], out, clean), mask


def _penmark(clean, rng, target, size):
    width = rng.uniform(8.0, 24.0)
    colour = PEN_COLOURS[rng.integers(len(PEN_COLOURS))]
    pts = [rng.uniform(0.1, 0.9, 2) * size]
    heading = rng.uniform(0, 2 * np.pi)
    for _ in range(24):
        heading += rng.uniform(-1.2, 1.2)
        step = rng.uniform(0.25, 0.5) * size
        nxt = pts[-1] + step * np.array([np.sin(heading), np.cos(heading)])
        # reflect off the borders so the stroke stays on the patch
        for k in range(2):
            if not 0 <= nxt[k] <= size:
                nxt[k] = np.clip(nxt[k], 0, size)
                heading = np.pi - heading if k == 1 else -heading
        pts.append(nxt)
    pts = np.array(pts)
    seg_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5

    # cumulative union of whole segments; only the last partial one is redrawn
    full = [np.zeros((size, size), dtype=bool)]
    for i in range(len(seg_len)):
        full.append(full[-1] | (_segment_distance(y, x, pts[i], pts[i + 1]) <= width / 2))
    ends = np.cumsum(seg_len)

    def stroke(length):
        k = int(np.searchsorted(ends, length, side="right"))
        if k >= len(seg_len):
            return full[-1]
        start = ends[k - 1] if k else 0.0
        frac = (length - start) / max(seg_len[k], 1e-9)
        q = pts[k] + (pts[k + 1] - pts[k]) * frac
        return full[k] | (_segment_distance(y, x, pts[k], q) <= width / 2)

    mask = _fit_area(stroke, target, 0.0, float(seg_len.sum()), size)
    return np.where(mask[..., None], colour, clean), mask


def _fold(clean, rng, target, size):
    theta = rng.uniform(0, np.pi)
    normal = np.array([np.sin(theta), np.cos(theta)])
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    proj = (y - size / 2) * normal[0] + (x - size / 2) * normal[1]
    offset = rng.uniform(-0.25, 0.25) * size

    def band(w):
        return (proj >= offset - w / 2) & (proj < offset + w / 2)

    mask = _fit_area(band, target, 0.0, 2.0 * size, size)
    shift = rng.integers(10, 31, 2) * rng.choice([-1, 1], 2)
    shifted = np.roll(clean, tuple(shift), axis=(0, 1))
    folded = 0.6 * 0.5 * (clean + shifted)
    return np.where(mask[..., None], folded, clean), mask


def _bubble(clean, rng, target, size):
    cy, cx = rng.uniform(0.2, 0.8, 2) * size

    def disk(r):
        return _ellipse_field(size, cy, cx, r, r, 0.0) < 1.0

    mask = _fit_area(disk, target, 1.0, 2.0 * size, size)
    r = np.sqrt(mask.sum() / np.pi)
    rad = _ellipse_field(size, cy, cx, r, r, 0.0)
    lighten = clean + 0.55 * (1.0 - clean)
    ring = np.exp(-0.5 * ((rad - 0.9) / 0.05) ** 2)[..., None]
    out = lighten + ring * (0.99 - lighten)
    return np.where(mask[..., None], out, clean), mask


_RENDERERS = {"oof": _oof, "penmark": _penmark, "fold": _fold, "bubble": _bubble}


def gen_artifact(seed: int, size: int, kind: str,
                 area: tuple[float, float] = (0.08, 0.30)) -> LabeledSample:
    """Render one artifact of ``kind`` on top of ``gen_clean(seed, size)``."""
    if kind not in _RENDERERS:
        raise ValueError(f"unknown artifact type {kind!r}; expected one of {ARTIFACT_TYPES}")
    lo, hi = area
    clean = gen_clean(seed, size)
    rng = np.random.Generator(
        np.random.PCG64(derive_seed(seed, 0xA27F, ARTIFACT_TYPES.index(kind))))
    # aim inside the range so discretisation cannot push the area outside it
    margin = 0.1 * (hi - lo)
    target = rng.uniform(lo + margin, hi - margin) if hi > lo else lo
    image, mask = _RENDERERS[kind](clean, rng, target, size)
    return LabeledSample(np.clip(image, 0.0, 1.0), {kind: mask}, seed, kind)


def clean_sample(seed: int, size: int) -> LabeledSample:
    return LabeledSample(gen_clean(seed, size), {}, seed, "clean")


# Split identifiers mixed into per-sample seeds.
SPLITS = {"train": 1, "artifact": 2, "test": 3}


def sample_seed(cfg: SynthConfig, split: str, index: int) -> int:
    return derive_seed(cfg.seed, SPLITS[split], index) & 0x7FFFFFFFFFFFFFFF


def split_kinds(cfg: SynthConfig, split: str) -> list[str]:
    """Deterministic per-index sample kinds for a split."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, SPLITS[split], 0x7E5)))
    mix = cfg.mix_vector()
    if split == "train":
        return ["clean"] * cfg.train_count
    if split == "artifact":
        picks = rng.choice(len(ARTIFACT_TYPES), size=cfg.artifact_count, p=mix)
        return [ARTIFACT_TYPES[i] for i in picks]
    kinds = []
    for _ in range(cfg.test_count):
        if rng.random() < cfg.test_clean_fraction:
            kinds.append("clean")
        else:
            kinds.append(ARTIFACT_TYPES[rng.choice(len(ARTIFACT_TYPES), p=mix)])
    return kinds


def make_sample(cfg: SynthConfig, split: str, index: int, kind: str) -> LabeledSample:
    seed = sample_seed(cfg, split, index)
    if kind == "clean":
        return clean_sample(seed, cfg.size)
    return gen_artifact(seed, cfg.size, kind, cfg.area)


def generate_split(cfg: SynthConfig, split: str):
    """Yield ``LabeledSample`` objects of a split in index order."""
    for i, kind in enumerate(split_kinds(cfg, split)):
        yield make_sample(cfg, split, i, kind)
