"""Basic (noise-MSE) and enhanced (noise-MSE + contrastive hinge) training."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .codec import CodecConfig, encode
from .denoiser import (
    AdaptorParams,
    DenoiserParams,
    adaptor_backward,
    apply_adaptor,
    backward,
    forward,
    init_params,
)
from .errors import ConfigError, DataError, NumericalError
from .rng import derive_seed, standard_normal
from .schedule import NoiseSchedule, diffuse

log = logging.getLogger(__name__)

MARGIN = 1.2
LAMBDA = 0.5


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch: int = 16
    lr: float = 1e-3
    margin: float = MARGIN
    lam: float = LAMBDA
    seed: int = 0
    mode: str = "basic"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: int = 32
    time_dim: int = 16

    def __post_init__(self):
        if self.mode not in ("basic", "enhanced"):
            raise ConfigError(f"mode must be 'basic' or 'enhanced', got {self.mode!r}")
        if self.margin <= 0 or self.lam < 0 or self.lr <= 0:
            raise ConfigError("need margin > 0, lambda >= 0, lr > 0")
        if self.steps < 0 or self.batch < 1:
            raise ConfigError("need steps >= 0 and batch >= 1")


def basic_loss(eps: np.ndarray, eps_hat: np.ndarray) -> float:
    eps, eps_hat = np.asarray(eps), np.asarray(eps_hat)
    if eps.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: {eps.shape} vs {eps_hat.shape}")
    return float(np.mean((eps - eps_hat) ** 2))


def latent_distance(z_a: np.ndarray, z_b: np.ndarray) -> float:
    """Squared L2 distance divided by the element count."""
    z_a, z_b = np.asarray(z_a), np.asarray(z_b)
    if z_a.shape != z_b.shape:
        raise ValueError(f"shape mismatch: {z_a.shape} vs {z_b.shape}")
    return float(np.mean((z_a - z_b) ** 2))


def contrastive_loss(z_clean: np.ndarray, z_art: np.ndarray, m: float = MARGIN) -> float:
    """Hinge ``max(0, m - d)`` that is zero once the pair is ``m`` apart."""
    if m <= 0:
        raise ValueError("margin must be positive")
    return max(0.0, m - latent_distance(z_clean, z_art))


def combined_loss(l_basic: float, l_con: float, lam: float = LAMBDA) -> float:
    return l_basic + lam * l_con


class Adam:
    """Adaptive moment estimation over a dict of arrays, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr=1e-3, beta1=0.9,
                 beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class Corpus:
    """A deterministic ordering of patches with a role tag (clean or artifact)."""

    def __init__(self, role: str, loader: Callable[[int], np.ndarray], size: int,
                 root: Path | None = None, names: list[str] | None = None):
        if role not in ("clean", "artifact"):
            raise ValueError(f"role must be clean or artifact, got {role!r}")
        self.role = role
        self.root = root
        self.names = names or [str(i) for i in range(size)]
        self._loader = loader
        self._size = size

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, i: int) -> np.ndarray:
        return self._loader(i)

    @classmethod
    def from_arrays(cls, role: str, patches) -> "Corpus":
        patches = list(patches)
        return cls(role, lambda i: patches[i], len(patches))

    @classmethod
    def from_dir(cls, role: str, root) -> "Corpus":
        from .imageio import read_rgb

        root = Path(root)
        if not root.is_dir():
            raise DataError(f"corpus directory not found: {root}")
        files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".png")
        return cls(role, lambda i: read_rgb(files[i]), len(files), root,
                   [p.name for p in files])

    def encode_all(self, codec: CodecConfig) -> np.ndarray:
        if len(self) == 0:
            raise DataError(f"{self.role} corpus is empty")
        latents = None
        for i in range(len(self)):
            try:
                z = encode(self[i], codec)
            except ValueError as exc:
                raise DataError(f"patch {self.names[i]}: {exc}") from exc
            if latents is None:
                latents = np.empty((len(self),) + z.shape)
            elif z.shape != latents.shape[1:]:
                raise DataError(f"patch {self.names[i]} has latent shape {z.shape}, "
                                f"expected {latents.shape[1:]}")
            latents[i] = z
        return latents


@dataclass
class LossRecord:
    step: int
    basic: float
    contrastive: float
    combined: float

    def as_dict(self) -> dict:
        return {"step": self.step, "basic": self.basic,
                "contrastive": self.contrastive, "combined": self.combined}


@dataclass
class TrainResult:
    params: DenoiserParams
    adaptor: AdaptorParams | None
    log: list[LossRecord] = field(default_factory=list)


def contrastive_batch(adaptor: AdaptorParams, z_clean: np.ndarray, z_art: np.ndarray,
                      m: float) -> tuple[float, dict[str, np.ndarray]]:
    """Mean hinge over paired rows and its gradient w.r.t. the adaptor.

    The bias cancels in the difference, so its gradient is zero.
    """
    diff = z_clean - z_art
    proj = diff @ adaptor.kernel.T
    n = z_clean.shape[0]
    per_elem = np.prod(z_clean.shape[1:])
    dist = (proj ** 2).reshape(n, -1).mean(axis=1)
    hinge = np.maximum(0.0, m - dist)
    active = (hinge > 0).astype(np.float64)
    coef = -(2.0 / per_elem) * active / n
    d_proj = proj * coef.reshape((n,) + (1,) * (proj.ndim - 1))
    c = diff.shape[-1]
    grad_kernel = d_proj.reshape(-1, c).T @ diff.reshape(-1, c)
    return float(hinge.mean()), {"kernel": grad_kernel, "bias": np.zeros_like(adaptor.bias)}


def sample_timesteps(rng: np.random.Generator, T: int, n: int) -> np.ndarray:
    """Draw ``n`` timesteps uniformly from ``1..T``."""
    return rng.integers(1, T + 1, size=n)


def initial_model(cfg: TrainConfig, codec: CodecConfig, schedule: NoiseSchedule):
    params = init_params(codec.channels, schedule.T, cfg.hidden, cfg.time_dim,
                         seed=derive_seed(cfg.seed, 0x1417))
    adaptor = AdaptorParams.identity(codec.channels) if cfg.mode == "enhanced" else None
    return params, adaptor


def train(clean: Corpus | np.ndarray, artifact: Corpus | np.ndarray | None,
          cfg: TrainConfig, codec: CodecConfig, schedule: NoiseSchedule,
          on_step: Callable[[LossRecord], None] | None = None) -> TrainResult:
    """Optimise the denoiser (and adaptor when enhanced) with Adam.

    ``clean``/``artifact`` may be corpora or pre-encoded latent stacks
    ``(N, H, W, C)``.
    """
    enhanced = cfg.mode == "enhanced"
    if enhanced and artifact is None:
        raise ConfigError("enhanced mode requires an artifact corpus")
    if not enhanced and artifact is not None:
        raise ConfigError("basic mode trains on clean patches only; "
                          "an artifact corpus was supplied")
    z_clean = _latents(clean, codec)
    z_art = _latents(artifact, codec) if enhanced else None

    params, adaptor = initial_model(cfg, codec, schedule)
    if cfg.steps == 0:
        return TrainResult(params, adaptor)

    # optimisation runs in float32; the result is widened back losslessly
    params = params.astype(np.float32)
    if enhanced:
        adaptor = AdaptorParams(adaptor.kernel.astype(np.float32),
                                adaptor.bias.astype(np.float32))
    z_clean = z_clean.astype(np.float32)
    z_art = z_art.astype(np.float32) if enhanced else None
    records: list[LossRecord] = []

    groups = {f"d.{k}": v for k, v in params.arrays().items()}
    if enhanced:
        groups.update({f"a.{k}": v for k, v in adaptor.arrays().items()})
    opt = Adam(groups, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, 0x7EA1)))
    n = len(z_clean)

    for step in range(cfg.steps):
        idx = rng.integers(0, n, size=cfg.batch)
        t = sample_timesteps(rng, schedule.T, cfg.batch)
        z0 = z_clean[idx]
        eps = standard_normal(derive_seed(cfg.seed, 0xE95, step), z0.shape).astype(np.float32)
        u = apply_adaptor(adaptor, z0) if enhanced else z0
        z_t = diffuse(u, t, eps, schedule).astype(np.float32)
        eps_hat, cache = forward(params, z_t, t)
        resid = eps_hat - eps
        l_basic = float(np.mean(resid ** 2))
        grads, d_zt = backward(params, cache, 2.0 * resid / resid.size)
        grads = {f"d.{k}": g for k, g in grads.items()}

        l_con = 0.0
        if enhanced:
            sqrt_ab = np.sqrt(schedule.alpha_bar(t)).reshape(-1, 1, 1, 1).astype(np.float32)
            a_grads, _ = adaptor_backward(adaptor, z0, d_zt * sqrt_ab)
            j = rng.integers(0, len(z_art), size=cfg.batch)
            l_con, c_grads = contrastive_batch(adaptor, z0, z_art[j], cfg.margin)
            for k in a_grads:
                grads[f"a.{k}"] = a_grads[k] + cfg.lam * c_grads[k]

        total = combined_loss(l_basic, l_con, cfg.lam)
        if not np.isfinite(total):
            raise NumericalError(
                f"non-finite loss at step {step}: basic={l_basic} contrastive={l_con}")
        opt.step(grads)
        rec = LossRecord(step, l_basic, l_con, total)
        records.append(rec)
        if on_step is not None:
            on_step(rec)
        if step % 100 == 0:
            log.debug("step %d basic %.5f con %.5f", step, l_basic, l_con)

    for name, arr in groups.items():
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"parameter {name} became non-finite")
    if enhanced:
        adaptor = AdaptorParams(adaptor.kernel.astype(np.float64),
                                adaptor.bias.astype(np.float64))
    return TrainResult(params.astype(np.float64), adaptor, records)


def _latents(corpus, codec: CodecConfig) -> np.ndarray:
    if isinstance(corpus, np.ndarray):
        if corpus.ndim != 4 or len(corpus) == 0:
            raise DataError("latent stack must be a non-empty (N, H, W, C) array")
        return corpus
    return corpus.encode_all(codec)


def encode_patches(patches: Iterable[np.ndarray], codec: CodecConfig) -> np.ndarray:
    return np.stack([encode(p, codec) for p in patches])
