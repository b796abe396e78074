"""Small convolutional noise predictor with hand-written backward pass.

Architecture (zero padding, stride 1, ReLU)::

    h1 = conv3x3(z, w1) + b1 + emb(t) @ time_w
    h2 = conv3x3(relu(h1), w2) + b2
    out = conv3x3(relu(h2), w3) + b3

Kernels are stored as ``(3, 3, C_in, C_out)`` and applied as cross-correlation.
The adaptor is a 1x1 convolution ``z @ kernel.T + bias``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

TIME_DIM = 16
HIDDEN = 32

# Serialization order of the weight blob.
PARAM_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3", "time_w")
ADAPTOR_ORDER = ("kernel", "bias")


@dataclass
class DenoiserParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    time_w: np.ndarray
    T: int

    @property
    def channels(self) -> int:
        return self.w1.shape[2]

    @property
    def hidden(self) -> int:
        return self.w1.shape[3]

    @property
    def time_dim(self) -> int:
        return self.time_w.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_ORDER}

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(**{k: v.copy() for k, v in self.arrays().items()}, T=self.T)

    def astype(self, dtype) -> "DenoiserParams":
        return DenoiserParams(**{k: v.astype(dtype) for k, v in self.arrays().items()},
                              T=self.T)


@dataclass
class AdaptorParams:
    kernel: np.ndarray
    bias: np.ndarray

    @classmethod
    def identity(cls, channels: int) -> "AdaptorParams":
        return cls(np.eye(channels), np.zeros(channels))

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "AdaptorParams":
        return AdaptorParams(self.kernel.copy(), self.bias.copy())


def init_params(channels: int, T: int, hidden: int = HIDDEN,
                time_dim: int = TIME_DIM, seed: int = 0) -> DenoiserParams:
    """He-normal kernels, zero biases; deterministic in ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))

    def he(cin, cout):
        return rng.standard_normal((3, 3, cin, cout)) * np.sqrt(2.0 / (9 * cin))

    w1 = he(channels, hidden)
    w2 = he(hidden, hidden)
    w3 = he(hidden, channels) * 0.1
    time_w = rng.standard_normal((time_dim, hidden)) * np.sqrt(1.0 / time_dim)
    return DenoiserParams(
        w1=w1, b1=np.zeros(hidden), w2=w2, b2=np.zeros(hidden),
        w3=w3, b3=np.zeros(channels), time_w=time_w, T=T,
    )


def timestep_embedding(t, T: int, dim: int = TIME_DIM) -> np.ndarray:
    """Sinusoidal embedding; angular frequencies geometric from 1 down to 1/T."""
    if dim % 2:
        raise ValueError("embedding dimension must be even")
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = float(T) ** (-np.arange(half) / max(half - 1, 1))
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _im2col(x: np.ndarray) -> np.ndarray:
    """``(N, H, W, C)`` -> ``(N, H, W, 9*C)`` with zero padding, (di, dj, c) order."""
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, w, 9, c), dtype=x.dtype)
    for k in range(9):
        di, dj = divmod(k, 3)
        cols[:, :, :, k, :] = xp[:, di:di + h, dj:dj + w, :]
    return cols.reshape(n, h, w, 9 * c)


def _col2im(dcols: np.ndarray, c: int) -> np.ndarray:
    n, h, w, _ = dcols.shape
    dcols = dcols.reshape(n, h, w, 9, c)
    dxp = np.zeros((n, h + 2, w + 2, c), dtype=dcols.dtype)
    for k in range(9):
        di, dj = divmod(k, 3)
        dxp[:, di:di + h, dj:dj + w, :] += dcols[:, :, :, k, :]
    return dxp[:, 1:-1, 1:-1, :]


def _conv(cols: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cols @ w.reshape(-1, w.shape[-1]) + b


@dataclass
class ForwardCache:
    params: DenoiserParams
    t: np.ndarray
    emb: np.ndarray
    cols1: np.ndarray
    h1: np.ndarray
    cols2: np.ndarray
    h2: np.ndarray
    cols3: np.ndarray


def _as_batch(z: np.ndarray, t, dtype):
    z = np.asarray(z, dtype=dtype)
    single = z.ndim == 3
    if single:
        z = z[None]
    t = np.broadcast_to(np.atleast_1d(np.asarray(t, dtype=np.int64)), (z.shape[0],))
    return z, t, single


def forward(p: DenoiserParams, z_t: np.ndarray, t) -> tuple[np.ndarray, ForwardCache]:
    """Predict the noise in ``z_t``; accepts ``(H, W, C)`` or ``(N, H, W, C)``."""
    z, t, single = _as_batch(z_t, t, p.w1.dtype)
    if z.shape[-1] != p.channels:
        raise ValueError(f"latent has {z.shape[-1]} channels, model expects {p.channels}")
    if np.any(t < 1) or np.any(t > p.T):
        raise ValueError(f"timestep out of range 1..{p.T}")
    emb = timestep_embedding(t, p.T, p.time_dim).astype(p.w1.dtype)
    cols1 = _im2col(z)
    h1 = _conv(cols1, p.w1, p.b1) + (emb @ p.time_w)[:, None, None, :]
    cols2 = _im2col(np.maximum(h1, 0.0))
    h2 = _conv(cols2, p.w2, p.b2)
    cols3 = _im2col(np.maximum(h2, 0.0))
    out = _conv(cols3, p.w3, p.b3)
    cache = ForwardCache(p, t, emb, cols1, h1, cols2, h2, cols3)
    return (out[0] if single else out), cache


def predict_noise(p: DenoiserParams, z_t: np.ndarray, t) -> np.ndarray:
    return forward(p, z_t, t)[0]


def backward(p: DenoiserParams, cache: ForwardCache | None,
             d_out: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients of a scalar loss given ``d_out = dL/d(out)``.

    Returns ``(grads, d_z)`` where ``grads`` is keyed like ``PARAM_ORDER``.
    """
    if cache is None or cache.params is not p:
        raise RuntimeError("backward called without a matching forward pass")
    d_out = np.asarray(d_out, dtype=p.w1.dtype)
    if d_out.ndim == 3:
        d_out = d_out[None]
    if d_out.shape[:-1] != cache.h1.shape[:-1] or d_out.shape[-1] != p.channels:
        raise ValueError("upstream gradient does not match cached forward pass")
    hidden, c = p.hidden, p.channels

    def flat(a):
        return a.reshape(-1, a.shape[-1])

    g = {}
    g["w3"] = (flat(cache.cols3).T @ flat(d_out)).reshape(p.w3.shape)
    g["b3"] = flat(d_out).sum(axis=0)
    d_a2 = _col2im(d_out @ p.w3.reshape(-1, c).T, hidden)
    d_h2 = d_a2 * (cache.h2 > 0)
    g["w2"] = (flat(cache.cols2).T @ flat(d_h2)).reshape(p.w2.shape)
    g["b2"] = flat(d_h2).sum(axis=0)
    d_a1 = _col2im(d_h2 @ p.w2.reshape(-1, hidden).T, hidden)
    d_h1 = d_a1 * (cache.h1 > 0)
    g["w1"] = (flat(cache.cols1).T @ flat(d_h1)).reshape(p.w1.shape)
    g["b1"] = flat(d_h1).sum(axis=0)
    g["time_w"] = cache.emb.T @ d_h1.sum(axis=(1, 2))
    d_z = _col2im(d_h1 @ p.w1.reshape(-1, hidden).T, c)
    return {k: g[k] for k in PARAM_ORDER}, d_z


def apply_adaptor(a: AdaptorParams, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    z = z.astype(np.result_type(z.dtype, a.kernel.dtype, np.float32), copy=False)
    if z.shape[-1] != a.kernel.shape[1]:
        raise ValueError(f"latent has {z.shape[-1]} channels, adaptor expects {a.kernel.shape[1]}")
    return z @ a.kernel.T + a.bias


def adaptor_backward(a: AdaptorParams, z: np.ndarray,
                     d_out: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients of the adaptor given its input ``z`` and ``dL/d(output)``."""
    c = a.kernel.shape[0]
    d2 = d_out.reshape(-1, c)
    grads = {
        "kernel": d2.T @ np.asarray(z).reshape(-1, c),
        "bias": d2.sum(axis=0),
    }
    return grads, d_out @ a.kernel
