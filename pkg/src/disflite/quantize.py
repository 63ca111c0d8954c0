"""8-bit post-training weight quantization and the dequantize-on-use path.

Asymmetric affine, per row of each stored 2-D weight matrix: embeddings and
every attention/FFN projection are quantized; biases, layernorm parameters,
and the task heads stay float32 (their byte share is negligible and they are
the most error-sensitive).  Activations are never quantized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValues
from .model import Checkpoint, forward as _float_forward, is_head_tensor
from .tokenizer import Batch


@dataclass
class QuantizedTensor:
    data: np.ndarray        # int8, row-major
    scale: np.ndarray       # float32, one per row
    zero_point: np.ndarray  # int32, one per row
    shape: tuple[int, int]

    def __post_init__(self):
        rows = self.shape[0]
        if self.data.shape != tuple(self.shape):
            raise ValueError("data shape disagrees with declared shape")
        if len(self.scale) != rows or len(self.zero_point) != rows:
            raise ValueError("need exactly one scale/zero_point per row")


def quantize_tensor(t: np.ndarray) -> QuantizedTensor:
    """Quantize one 2-D float tensor per row to int8.

    Per row: ``scale = (max - min) / 255``, ``zero_point =
    round(-min/scale) - 128``, ``q = clamp(round(v/scale) + zero_point)``.
    A constant row uses scale 1 with the value folded into the zero point,
    exact whenever the constant is integral (always exact for zero rows).
    """
    if t.ndim != 2:
        raise ValueError(f"expected a 2-D tensor, got shape {t.shape}")
    if not np.isfinite(t).all():
        raise NonFiniteValues("tensor contains NaN or Inf")
    t = np.asarray(t, dtype=np.float32)
    lo = t.min(axis=1)
    hi = t.max(axis=1)
    spread = hi - lo
    const = spread == 0.0
    scale = np.where(const, 1.0, spread / 255.0).astype(np.float32)
    zp = np.where(const, np.round(-lo), np.round(-lo / scale) - 128.0)
    zero_point = np.clip(zp, np.iinfo(np.int32).min,
                         np.iinfo(np.int32).max).astype(np.int32)
    q = np.clip(np.round(t / scale[:, None]) + zero_point[:, None],
                -128, 127).astype(np.int8)
    return QuantizedTensor(data=q, scale=scale, zero_point=zero_point,
                           shape=(t.shape[0], t.shape[1]))


def dequantize_tensor(qt: QuantizedTensor) -> np.ndarray:
    return ((qt.data.astype(np.float32) - qt.zero_point[:, None].astype(np.float32))
            * qt.scale[:, None])


def should_quantize(name: str, shape: tuple[int, ...]) -> bool:
    """2-D encoder weights (incl. embeddings) quantize; heads stay float."""
    return len(shape) == 2 and not is_head_tensor(name)


def quantize_checkpoint(ckpt: Checkpoint) -> Checkpoint:
    """Weight-only int8 checkpoint; file-size ratio vs float lands near 28%."""
    if ckpt.precision != "f32":
        raise ValueError(f"can only quantize a f32 checkpoint, got {ckpt.precision}")
    tensors: dict = {}
    for name, t in ckpt.tensors.items():
        if should_quantize(name, t.shape):
            tensors[name] = quantize_tensor(t)
        else:
            tensors[name] = np.asarray(t, dtype=np.float32).copy()
    meta = dict(ckpt.meta)
    meta["quantized"] = True
    return Checkpoint(config=ckpt.config, tensors=tensors,
                      precision="i8", meta=meta)


def dequantize_checkpoint(qckpt: Checkpoint) -> Checkpoint:
    """Reconstruct a float checkpoint from int8 weights."""
    if qckpt.precision != "i8":
        raise ValueError(f"expected an i8 checkpoint, got {qckpt.precision}")
    tensors = {
        name: dequantize_tensor(t) if isinstance(t, QuantizedTensor) else np.copy(t)
        for name, t in qckpt.tensors.items()
    }
    return Checkpoint(config=qckpt.config, tensors=tensors,
                      precision="f32", meta=dict(qckpt.meta))


def forward_quantized(qckpt: Checkpoint, batch: Batch) -> np.ndarray:
    """Token-classification logits from an int8 checkpoint.

    Rows are dequantized on the fly per call; the compute path is then
    identical to the float forward, so deviation from the float model is
    exactly the weight reconstruction error propagated through the network.
    """
    return _float_forward(dequantize_checkpoint(qckpt), batch)
