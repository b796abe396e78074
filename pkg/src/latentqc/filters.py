"""Separable Gaussian filtering with reflect borders."""

from __future__ import annotations

import math

import numpy as np


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian truncated at +-ceil(3 sigma), normalised to sum 1."""
    radius = max(int(math.ceil(3.0 * sigma)), 0)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _reflect_index(n: int, radius: int) -> np.ndarray:
    """Indices of a reflect-padded axis (edge sample not repeated)."""
    idx = np.arange(-radius, n + radius)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def correlate_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    n = a.shape[axis]
    padded = np.take(a, _reflect_index(n, radius), axis=axis)
    out = np.zeros_like(a, dtype=np.float64)
    for k, w in enumerate(kernel):
        out += w * np.take(padded, np.arange(k, k + n), axis=axis)
    return out


def gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    """Blur the first two axes of ``a``; ``sigma == 0`` returns a copy."""
    a = np.asarray(a, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return a.copy()
    k = gaussian_kernel(sigma)
    return correlate_axis(correlate_axis(a, k, 0), k, 1)
