"""Binary model file ``DQCM``.

Layout (all little-endian)::

    magic           4s   b"DQCM"
    version         u8   1
    mode            u8   0 = basic, 1 = enhanced
    T               u32
    beta_start      f64
    beta_end        f64
    block           u32
    channels        u32
    projection_seed u64
    hidden          u32
    time_dim        u32
    t_star          u32
    draws           u32
    n_weights       u32
    weights         n_weights x f32

Weight order: w1, b1, w2, b2, w3, b3, time_w, then adaptor kernel and bias
when enhanced. Kernels are ``(3, 3, C_in, C_out)`` flattened C-order; the
adaptor kernel is ``(C_out, C_in)``; ``time_w`` is ``(time_dim, hidden)``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import CodecConfig
from .denoiser import ADAPTOR_ORDER, PARAM_ORDER, AdaptorParams, DenoiserParams
from .errors import DataError
from .schedule import NoiseSchedule, build_schedule

MAGIC = b"DQCM"
VERSION = 1
_HEADER = struct.Struct("<4sBBIddIIQIIIII")


@dataclass
class Model:
    schedule: NoiseSchedule
    codec: CodecConfig
    params: DenoiserParams
    adaptor: AdaptorParams | None = None
    t_star: int | None = None
    draws: int = 4

    @property
    def mode(self) -> str:
        return "basic" if self.adaptor is None else "enhanced"

    @property
    def default_t_star(self) -> int:
        return self.t_star if self.t_star is not None else self.schedule.default_t_star()


def _shapes(channels: int, hidden: int, time_dim: int) -> dict[str, tuple[int, ...]]:
    return {
        "w1": (3, 3, channels, hidden), "b1": (hidden,),
        "w2": (3, 3, hidden, hidden), "b2": (hidden,),
        "w3": (3, 3, hidden, channels), "b3": (channels,),
        "time_w": (time_dim, hidden),
        "kernel": (channels, channels), "bias": (channels,),
    }


def to_bytes(model: Model) -> bytes:
    p = model.params
    arrays = [p.arrays()[k] for k in PARAM_ORDER]
    if model.adaptor is not None:
        arrays += [model.adaptor.arrays()[k] for k in ADAPTOR_ORDER]
    blob = np.concatenate([a.ravel() for a in arrays]).astype("<f4")
    header = _HEADER.pack(
        MAGIC, VERSION, 0 if model.adaptor is None else 1,
        model.schedule.T, model.schedule.beta_start, model.schedule.beta_end,
        model.codec.block, model.codec.channels, model.codec.projection_seed,
        p.hidden, p.time_dim, model.default_t_star, model.draws, blob.size,
    )
    return header + blob.tobytes()


def from_bytes(data: bytes) -> Model:
    if len(data) < _HEADER.size:
        raise DataError("model file truncated")
    (magic, version, mode, T, b0, b1, block, channels, pseed, hidden, time_dim,
     t_star, draws, n) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"not a model file (magic {magic!r})")
    if version != VERSION:
        raise DataError(f"unsupported model file version {version}")
    if mode not in (0, 1):
        raise DataError(f"invalid mode flag {mode}")
    blob = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    shapes = _shapes(channels, hidden, time_dim)
    names = list(PARAM_ORDER) + (list(ADAPTOR_ORDER) if mode == 1 else [])
    expected = sum(int(np.prod(shapes[k])) for k in names)
    if n != expected or blob.size != expected:
        raise DataError(f"weight blob has {blob.size} values, header says {n}, "
                        f"{mode and 'enhanced' or 'basic'} layout needs {expected}")
    arrays, pos = {}, 0
    for k in names:
        size = int(np.prod(shapes[k]))
        arrays[k] = blob[pos:pos + size].reshape(shapes[k]).copy()
        pos += size
    params = DenoiserParams(**{k: arrays[k] for k in PARAM_ORDER}, T=T)
    adaptor = AdaptorParams(arrays["kernel"], arrays["bias"]) if mode == 1 else None
    try:
        schedule = build_schedule(T, b0, b1)
        codec = CodecConfig(channels, pseed, block)
    except ValueError as exc:
        raise DataError(f"invalid model header: {exc}") from exc
    return Model(schedule, codec, params, adaptor, t_star, draws)


def save(model: Model, path) -> bytes:
    data = to_bytes(model)
    Path(path).write_bytes(data)
    return data


def load(path) -> Model:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return from_bytes(data)


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
