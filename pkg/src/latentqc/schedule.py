"""Linear-beta noise schedules and closed-form forward noising."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_T = 100


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed ``betas`` and cumulative ``alpha_bars`` for steps ``1..T``.

    Arrays are 0-indexed: ``alpha_bars[t - 1]`` is the value for step ``t``.
    """

    T: int
    beta_start: float
    beta_end: float
    betas: np.ndarray = field(repr=False, compare=False)
    alpha_bars: np.ndarray = field(repr=False, compare=False)

    def alpha_bar(self, t) -> np.ndarray | float:
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"timestep out of range 1..{self.T}: {t}")
        return self.alpha_bars[t - 1]

    def default_t_star(self) -> int:
        return int(np.ceil(0.8 * self.T))


def build_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    T = int(T)
    betas = np.linspace(beta_start, beta_end, T) if T > 1 else np.array([beta_start])
    alpha_bars = np.cumprod(1.0 - betas)
    betas.flags.writeable = False
    alpha_bars.flags.writeable = False
    return NoiseSchedule(T, float(beta_start), float(beta_end), betas, alpha_bars)


def scaled_linear_betas(T: int) -> tuple[float, float]:
    """The 1e-4..2e-2 range at T=1000, rescaled by 1000/T for shorter chains.

    Endpoints are capped at 0.999 so very short chains stay valid.
    """
    scale = 1000.0 / T
    return min(1e-4 * scale, 0.999), min(2e-2 * scale, 0.999)


def default_schedule(T: int = DEFAULT_T) -> NoiseSchedule:
    return build_schedule(T, *scaled_linear_betas(T))


def diffuse(z0: np.ndarray, t, eps: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Noise ``z0`` to step ``t``: ``sqrt(abar_t) z0 + sqrt(1 - abar_t) eps``.

    ``t`` may be a scalar or a length-N vector matching the leading axis of a
    batched ``z0``.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise ValueError(f"shape mismatch: z0 {z0.shape} vs eps {eps.shape}")
    abar = np.asarray(s.alpha_bar(t), dtype=np.float64)
    if abar.ndim == 1:
        if abar.shape[0] != z0.shape[0]:
            raise ValueError("per-sample timesteps must match the batch axis")
        abar = abar.reshape((-1,) + (1,) * (z0.ndim - 1))
    return np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps
