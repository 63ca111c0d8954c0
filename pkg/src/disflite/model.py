"""Transformer encoder with token-classification, MLM, and NSP heads.

Plain numpy implementation with hand-written backpropagation.  Post-layernorm
block order, GELU (tanh approximation), learned absolute positions, and an
MLM output tied to the token embedding matrix.  Reductions that feed
statistics (layernorm moments, loss means) accumulate in float64 while
storage stays in the checkpoint dtype.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, asdict
from typing import Any

import numpy as np

from .errors import IdOutOfRange, ShapeMismatch
from .tokenizer import Batch

_LN_EPS = 1e-12
_MASK_NEG = -1e9
_GELU_C0 = math.sqrt(2.0 / math.pi)
_GELU_C1 = 0.044715
_INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    layers: int
    hidden: int
    heads: int
    vocab_size: int
    intermediate: int = 0  # 0 -> 4 * hidden
    max_positions: int = 512
    segments: int = 2  # 0 disables segment embeddings (DistilBERT-shape)
    num_tags: int = 3
    dropout: float = 0.1

    def __post_init__(self):
        if self.intermediate == 0:
            object.__setattr__(self, "intermediate", 4 * self.hidden)
        for name in ("layers", "hidden", "heads", "vocab_size",
                     "intermediate", "max_positions", "num_tags"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.segments < 0:
            raise ValueError("segments must be >= 0")
        if self.hidden % self.heads != 0:
            raise ValueError(
                f"hidden {self.hidden} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelConfig":
        return cls(**d)


def tensor_layout(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) list of every checkpoint tensor."""
    H, I, V = cfg.hidden, cfg.intermediate, cfg.vocab_size
    out: list[tuple[str, tuple[int, ...]]] = [
        ("emb.tok", (V, H)),
        ("emb.pos", (cfg.max_positions, H)),
    ]
    if cfg.segments > 0:
        out.append(("emb.seg", (cfg.segments, H)))
    out += [("emb.ln.g", (H,)), ("emb.ln.b", (H,))]
    for i in range(cfg.layers):
        p = f"l{i}."
        out += [
            (p + "att.wq", (H, H)), (p + "att.bq", (H,)),
            (p + "att.wk", (H, H)), (p + "att.bk", (H,)),
            (p + "att.wv", (H, H)), (p + "att.bv", (H,)),
            (p + "att.wo", (H, H)), (p + "att.bo", (H,)),
            (p + "att.ln.g", (H,)), (p + "att.ln.b", (H,)),
            (p + "ffn.w1", (H, I)), (p + "ffn.b1", (I,)),
            (p + "ffn.w2", (I, H)), (p + "ffn.b2", (H,)),
            (p + "ffn.ln.g", (H,)), (p + "ffn.ln.b", (H,)),
        ]
    out += [
        ("cls.w", (cfg.num_tags, H)), ("cls.b", (cfg.num_tags,)),
        ("mlm.w", (H, H)), ("mlm.b", (H,)),
        ("mlm.ln.g", (H,)), ("mlm.ln.b", (H,)),
        ("mlm.out_b", (V,)),
        ("nsp.w", (2, H)), ("nsp.b", (2,)),
    ]
    return out


HEAD_PREFIXES = ("cls.", "mlm.", "nsp.")


def is_head_tensor(name: str) -> bool:
    return name.startswith(HEAD_PREFIXES)


@dataclass
class Checkpoint:
    config: ModelConfig
    tensors: dict[str, Any]
    precision: str = "f32"  # "f32" | "i8"
    meta: dict[str, Any] = field(default_factory=dict)

    def copy(self) -> "Checkpoint":
        return Checkpoint(config=self.config,
                          tensors={k: np.copy(v) if isinstance(v, np.ndarray) else copy.deepcopy(v)
                                   for k, v in self.tensors.items()},
                          precision=self.precision,
                          meta=dict(self.meta))


def _truncated_normal(rng: np.random.Generator, shape: tuple[int, ...],
                      std: float, dtype) -> np.ndarray:
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)


def init(cfg: ModelConfig, seed: int, dtype=np.float32) -> Checkpoint:
    """Fresh checkpoint: truncated-normal weights, zero biases, unit gains."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_layout(cfg):
        if name.endswith(".ln.g"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif len(shape) == 1:
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            tensors[name] = _truncated_normal(rng, shape, _INIT_STD, dtype)
    return Checkpoint(config=cfg, tensors=tensors, precision="f32")


def count_params(cfg: ModelConfig) -> int:
    """Encoder parameter count (embeddings + blocks; heads excluded)."""
    H, I = cfg.hidden, cfg.intermediate
    emb = cfg.vocab_size * H + cfg.max_positions * H + cfg.segments * H + 2 * H
    per_layer = (3 * (H * H + H)   # q, k, v projections
                 + (H * H + H)     # output projection
                 + 2 * H           # attention layernorm
                 + (H * I + I)     # ffn in
                 + (I * H + H)     # ffn out
                 + 2 * H)          # ffn layernorm
    return emb + cfg.layers * per_layer


def encoder_param_count(ckpt: Checkpoint) -> int:
    """Reflection-based encoder parameter sum (cross-check for count_params)."""
    return sum(int(np.prod(t.shape)) for name, t in ckpt.tensors.items()
               if not is_head_tensor(name))


# ---------------------------------------------------------------------------
# forward primitives
# ---------------------------------------------------------------------------

def _layernorm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = np.mean(x, axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True, dtype=np.float64)
    inv = (1.0 / np.sqrt(var + _LN_EPS)).astype(x.dtype)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_backward(dy: np.ndarray, cache, g: np.ndarray):
    xhat, inv = cache
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)), dtype=np.float64)
    db = np.sum(dy, axis=tuple(range(dy.ndim - 1)), dtype=np.float64)
    dxhat = dy * g
    m1 = np.mean(dxhat, axis=-1, keepdims=True, dtype=np.float64)
    m2 = np.mean(dxhat * xhat, axis=-1, keepdims=True, dtype=np.float64)
    dx = inv * (dxhat - m1.astype(dy.dtype) - xhat * m2.astype(dy.dtype))
    return dx, dg.astype(dy.dtype), db.astype(dy.dtype)


def _gelu(x: np.ndarray):
    t = np.tanh(_GELU_C0 * (x + _GELU_C1 * x ** 3))
    return 0.5 * x * (1.0 + t), t


def _gelu_backward(dy: np.ndarray, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    du = 0.5 * x * (1.0 - t * t) * _GELU_C0 * (1.0 + 3.0 * _GELU_C1 * x * x)
    return dy * (0.5 * (1.0 + t) + du)


def _softmax_last(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _dropout_mask(rng: np.random.Generator, shape, p: float, dtype) -> np.ndarray:
    return (rng.random(shape) >= p).astype(dtype) / (1.0 - p)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, h = x.shape
    return x.reshape(b, t, heads, h // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, a, t, d = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, a * d)


def _check_batch(cfg: ModelConfig, batch: Batch) -> None:
    ids = batch.ids
    if ids.ndim != 2:
        raise ShapeMismatch(f"ids must be 2-D, got shape {ids.shape}")
    if ids.shape[1] > cfg.max_positions:
        raise ShapeMismatch(
            f"sequence length {ids.shape[1]} exceeds max_positions "
            f"{cfg.max_positions}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise IdOutOfRange(
            f"token ids must be in [0, {cfg.vocab_size})")
    seg_limit = cfg.segments if cfg.segments > 0 else 1
    if batch.segment_ids.size and (batch.segment_ids.min() < 0
                                   or batch.segment_ids.max() >= seg_limit):
        raise IdOutOfRange(f"segment ids must be in [0, {seg_limit})")


def _encoder_forward(tensors, cfg: ModelConfig, batch: Batch,
                     train: bool, rng: np.random.Generator | None):
    """Run the embedding + block stack; returns hidden states and a cache."""
    _check_batch(cfg, batch)
    if train and cfg.dropout > 0.0 and rng is None:
        raise ValueError("training-mode forward with dropout needs an rng")
    T = batch.ids.shape[1]
    dt = tensors["emb.tok"].dtype
    p = cfg.dropout if train else 0.0

    e = tensors["emb.tok"][batch.ids]
    e = e + tensors["emb.pos"][:T][None, :, :]
    if cfg.segments > 0:
        e = e + tensors["emb.seg"][batch.segment_ids]
    x, ln0 = _layernorm(e, tensors["emb.ln.g"], tensors["emb.ln.b"])
    emb_mask = None
    if p > 0.0:
        emb_mask = _dropout_mask(rng, x.shape, p, dt)
        x = x * emb_mask

    mask_add = ((1.0 - batch.attention_mask.astype(dt))
                * _MASK_NEG)[:, None, None, :]
    inv_scale = 1.0 / math.sqrt(cfg.head_dim)

    layers = []
    for i in range(cfg.layers):
        pre = f"l{i}."
        x_in = x
        q = _split_heads(x @ tensors[pre + "att.wq"] + tensors[pre + "att.bq"], cfg.heads)
        k = _split_heads(x @ tensors[pre + "att.wk"] + tensors[pre + "att.bk"], cfg.heads)
        v = _split_heads(x @ tensors[pre + "att.wv"] + tensors[pre + "att.bv"], cfg.heads)
        scores = (q @ k.transpose(0, 1, 3, 2)) * inv_scale + mask_add
        probs = _softmax_last(scores)
        probs_used = probs
        probs_mask = None
        if p > 0.0:
            probs_mask = _dropout_mask(rng, probs.shape, p, dt)
            probs_used = probs * probs_mask
        ctx = _merge_heads(probs_used @ v)
        ao = ctx @ tensors[pre + "att.wo"] + tensors[pre + "att.bo"]
        ao_mask = None
        if p > 0.0:
            ao_mask = _dropout_mask(rng, ao.shape, p, dt)
            ao = ao * ao_mask
        h1, ln1 = _layernorm(x_in + ao, tensors[pre + "att.ln.g"],
                             tensors[pre + "att.ln.b"])
        mid = h1 @ tensors[pre + "ffn.w1"] + tensors[pre + "ffn.b1"]
        act, gelu_t = _gelu(mid)
        f = act @ tensors[pre + "ffn.w2"] + tensors[pre + "ffn.b2"]
        ffn_mask = None
        if p > 0.0:
            ffn_mask = _dropout_mask(rng, f.shape, p, dt)
            f = f * ffn_mask
        x, ln2 = _layernorm(h1 + f, tensors[pre + "ffn.ln.g"],
                            tensors[pre + "ffn.ln.b"])
        layers.append(dict(x_in=x_in, q=q, k=k, v=v, probs=probs,
                           probs_mask=probs_mask, probs_used=probs_used,
                           ctx=ctx, ao_mask=ao_mask, ln1=ln1, h1=h1,
                           mid=mid, gelu_t=gelu_t, act=act,
                           ffn_mask=ffn_mask, ln2=ln2))
    cache = dict(batch=batch, emb_mask=emb_mask, ln0=ln0,
                 mask_add=mask_add, inv_scale=inv_scale, layers=layers, h=x)
    return x, cache


def _encoder_backward(tensors, cfg: ModelConfig, cache, dh: np.ndarray):
    """Backprop dh (gradient at final hidden states) through the stack."""
    grads: dict[str, np.ndarray] = {}
    batch: Batch = cache["batch"]
    inv_scale = cache["inv_scale"]
    dx = dh
    for i in reversed(range(cfg.layers)):
        pre = f"l{i}."
        c = cache["layers"][i]
        dx, dg2, db2 = _layernorm_backward(dx, c["ln2"], tensors[pre + "ffn.ln.g"])
        grads[pre + "ffn.ln.g"] = dg2
        grads[pre + "ffn.ln.b"] = db2
        dh1 = dx
        df = dx if c["ffn_mask"] is None else dx * c["ffn_mask"]
        grads[pre + "ffn.w2"] = np.tensordot(c["act"], df, axes=([0, 1], [0, 1]))
        grads[pre + "ffn.b2"] = df.sum(axis=(0, 1))
        dact = df @ tensors[pre + "ffn.w2"].T
        dmid = _gelu_backward(dact, c["mid"], c["gelu_t"])
        grads[pre + "ffn.w1"] = np.tensordot(c["h1"], dmid, axes=([0, 1], [0, 1]))
        grads[pre + "ffn.b1"] = dmid.sum(axis=(0, 1))
        dh1 = dh1 + dmid @ tensors[pre + "ffn.w1"].T

        dh1, dg1, db1 = _layernorm_backward(dh1, c["ln1"], tensors[pre + "att.ln.g"])
        grads[pre + "att.ln.g"] = dg1
        grads[pre + "att.ln.b"] = db1
        dx = dh1
        dao = dh1 if c["ao_mask"] is None else dh1 * c["ao_mask"]
        grads[pre + "att.wo"] = np.tensordot(c["ctx"], dao, axes=([0, 1], [0, 1]))
        grads[pre + "att.bo"] = dao.sum(axis=(0, 1))
        dctx = _split_heads(dao @ tensors[pre + "att.wo"].T, cfg.heads)
        dprobs_used = dctx @ c["v"].transpose(0, 1, 3, 2)
        dv = c["probs_used"].transpose(0, 1, 3, 2) @ dctx
        dprobs = (dprobs_used if c["probs_mask"] is None
                  else dprobs_used * c["probs_mask"])
        dscores = c["probs"] * (dprobs - np.sum(dprobs * c["probs"], axis=-1,
                                                keepdims=True))
        dq = (dscores @ c["k"]) * inv_scale
        dk = (dscores.transpose(0, 1, 3, 2) @ c["q"]) * inv_scale
        for nm, dhead in (("q", dq), ("k", dk), ("v", dv)):
            flat = _merge_heads(dhead)
            grads[pre + f"att.w{nm}"] = np.tensordot(
                c["x_in"], flat, axes=([0, 1], [0, 1]))
            grads[pre + f"att.b{nm}"] = flat.sum(axis=(0, 1))
            dx = dx + flat @ tensors[pre + f"att.w{nm}"].T

    demb = dx if cache["emb_mask"] is None else dx * cache["emb_mask"]
    demb, dg0, db0 = _layernorm_backward(demb, cache["ln0"], tensors["emb.ln.g"])
    grads["emb.ln.g"] = dg0
    grads["emb.ln.b"] = db0

    H = cfg.hidden
    dtok = np.zeros_like(tensors["emb.tok"])
    np.add.at(dtok, batch.ids.ravel(), demb.reshape(-1, H))
    grads["emb.tok"] = dtok
    dpos = np.zeros_like(tensors["emb.pos"])
    dpos[:demb.shape[1]] = demb.sum(axis=0)
    grads["emb.pos"] = dpos
    if cfg.segments > 0:
        dseg = np.zeros_like(tensors["emb.seg"])
        np.add.at(dseg, batch.segment_ids.ravel(), demb.reshape(-1, H))
        grads["emb.seg"] = dseg
    return grads


# ---------------------------------------------------------------------------
# heads and public entry points
# ---------------------------------------------------------------------------

def _require_f32(ckpt: Checkpoint) -> None:
    if ckpt.precision != "f32":
        raise ValueError(
            f"float forward path needs a f32 checkpoint, got {ckpt.precision}; "
            "use quantize.forward_quantized for i8")


def forward(ckpt: Checkpoint, batch: Batch, train: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-token classification logits, shape (batch, positions, num_tags)."""
    _require_f32(ckpt)
    h, cache = _encoder_forward(ckpt.tensors, ckpt.config, batch, train, rng)
    if train and ckpt.config.dropout > 0.0:
        h = h * _dropout_mask(rng, h.shape, ckpt.config.dropout, h.dtype)
    return h @ ckpt.tensors["cls.w"].T + ckpt.tensors["cls.b"]


def forward_mlm_nsp(ckpt: Checkpoint, batch: Batch,
                    mlm_positions: tuple[np.ndarray, np.ndarray],
                    train: bool = False,
                    rng: np.random.Generator | None = None,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """MLM logits at masked positions plus NSP logits from position 0."""
    _require_f32(ckpt)
    rows, cols = mlm_positions
    if len(rows) != len(cols):
        raise ShapeMismatch("mlm rows and cols differ in length")
    h, _ = _encoder_forward(ckpt.tensors, ckpt.config, batch, train, rng)
    mlm_logits = _mlm_head_forward(ckpt.tensors, h, rows, cols)[0]
    nsp_logits = h[:, 0] @ ckpt.tensors["nsp.w"].T + ckpt.tensors["nsp.b"]
    return mlm_logits, nsp_logits


def _mlm_head_forward(tensors, h, rows, cols):
    gathered = h[rows, cols] if len(rows) else np.zeros(
        (0, h.shape[-1]), dtype=h.dtype)
    mid = gathered @ tensors["mlm.w"] + tensors["mlm.b"]
    act, t = _gelu(mid)
    tln, ln_cache = _layernorm(act, tensors["mlm.ln.g"], tensors["mlm.ln.b"])
    logits = tln @ tensors["emb.tok"].T + tensors["mlm.out_b"]
    return logits, (gathered, mid, t, tln, ln_cache)


def classifier_loss_forward(ckpt: Checkpoint, batch: Batch, train: bool,
                            rng: np.random.Generator | None):
    """Encoder + classifier with cache kept for a later backward call."""
    _require_f32(ckpt)
    h, cache = _encoder_forward(ckpt.tensors, ckpt.config, batch, train, rng)
    cls_mask = None
    h_used = h
    p = ckpt.config.dropout if train else 0.0
    if p > 0.0:
        cls_mask = _dropout_mask(rng, h.shape, p, h.dtype)
        h_used = h * cls_mask
    logits = h_used @ ckpt.tensors["cls.w"].T + ckpt.tensors["cls.b"]
    cache["cls_mask"] = cls_mask
    cache["h_used"] = h_used
    return logits, cache


def classifier_loss_backward(ckpt: Checkpoint, cache, dlogits: np.ndarray):
    tensors = ckpt.tensors
    grads = {
        "cls.w": np.tensordot(dlogits, cache["h_used"], axes=([0, 1], [0, 1])),
        "cls.b": dlogits.sum(axis=(0, 1)),
    }
    dh = dlogits @ tensors["cls.w"]
    if cache["cls_mask"] is not None:
        dh = dh * cache["cls_mask"]
    grads.update(_encoder_backward(tensors, ckpt.config, cache, dh))
    return grads


def pretrain_loss_forward(ckpt: Checkpoint, batch: Batch,
                          mlm_positions: tuple[np.ndarray, np.ndarray],
                          train: bool, rng: np.random.Generator | None):
    """Encoder + MLM/NSP heads with cache for backward."""
    _require_f32(ckpt)
    rows, cols = mlm_positions
    h, cache = _encoder_forward(ckpt.tensors, ckpt.config, batch, train, rng)
    mlm_logits, mlm_cache = _mlm_head_forward(ckpt.tensors, h, rows, cols)
    nsp_logits = h[:, 0] @ ckpt.tensors["nsp.w"].T + ckpt.tensors["nsp.b"]
    cache["mlm_cache"] = mlm_cache
    cache["mlm_positions"] = (rows, cols)
    return mlm_logits, nsp_logits, cache


def pretrain_loss_backward(ckpt: Checkpoint, cache,
                           d_mlm: np.ndarray, d_nsp: np.ndarray):
    tensors = ckpt.tensors
    h = cache["h"]
    rows, cols = cache["mlm_positions"]
    gathered, mid, gelu_t, tln, ln_cache = cache["mlm_cache"]

    grads: dict[str, np.ndarray] = {}
    dh = np.zeros_like(h)

    # NSP head reads position 0
    grads["nsp.w"] = d_nsp.T @ h[:, 0]
    grads["nsp.b"] = d_nsp.sum(axis=0)
    dh[:, 0] += d_nsp @ tensors["nsp.w"]

    # MLM head; output weights tied to emb.tok
    grads["mlm.out_b"] = d_mlm.sum(axis=0)
    dtok_tie = np.tensordot(d_mlm, tln, axes=([0], [0]))
    dtln = d_mlm @ tensors["emb.tok"]
    dact, dg, db = _layernorm_backward(dtln, ln_cache, tensors["mlm.ln.g"])
    grads["mlm.ln.g"] = dg
    grads["mlm.ln.b"] = db
    dmid = _gelu_backward(dact, mid, gelu_t)
    grads["mlm.w"] = gathered.T @ dmid
    grads["mlm.b"] = dmid.sum(axis=0)
    if len(rows):
        np.add.at(dh, (rows, cols), dmid @ tensors["mlm.w"].T)

    grads.update(_encoder_backward(tensors, ckpt.config, cache, dh))
    grads["emb.tok"] = grads["emb.tok"] + dtok_tie
    return grads
