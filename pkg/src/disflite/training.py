"""Losses, Adam, fine-tuning and continued-pretraining loops, random sweep.

Optimizer follows the BERT recipe: decoupled weight decay on 2-D weights
only, beta1 0.9, beta2 0.999, eps 1e-6, with either a constant or a
linear-to-zero learning-rate schedule.  All loops are deterministic given
the config seed; data order, dropout, and masking draw from seeds derived
with SeedSequence so the streams stay independent of one another.
"""

from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .corpus import LabeledSequence
from .errors import (
    AllPositionsIgnored,
    EmptySilverWithPositivePct,
    NonFiniteGradient,
)
from .model import (
    Checkpoint,
    classifier_loss_backward,
    classifier_loss_forward,
    forward,
    pretrain_loss_backward,
    pretrain_loss_forward,
)
from .tokenizer import (
    Batch,
    CLS_ID,
    MASK_ID,
    SEP_ID,
    Encoding,
    Vocab,
    encode,
    first_subword_positions,
    pad_batch,
    tokenize,
)
from . import corpus as _corpus

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-6

NSP_NOT_NEXT = 0
NSP_IS_NEXT = 1

FINETUNE_LR = 2e-4
PRETRAIN_LR = 1e-4


@dataclass
class TrainConfig:
    learning_rate: float = FINETUNE_LR
    batch_size: int = 32
    epochs: int = 20
    schedule: str = "linear_to_zero"  # or "constant"
    weight_decay: float = 0.01
    seed: int = 0
    eval_every: int = 0  # 0 -> evaluate once per epoch

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.schedule not in ("linear_to_zero", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def softmax_xent(logits: np.ndarray, targets: np.ndarray,
                 ) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over positions with target >= 0.

    Targets of -1 are ignored: they contribute neither to the mean nor to
    the returned gradient.  The scalar reduction accumulates in float64.
    """
    if logits.shape[:-1] != targets.shape:
        raise ValueError(
            f"logits {logits.shape} do not match targets {targets.shape}")
    mask = targets >= 0
    n = int(mask.sum())
    if n == 0:
        raise AllPositionsIgnored("no supervised positions in batch")
    z = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    picked = np.take_along_axis(
        z, np.where(mask, targets, 0)[..., None], axis=-1)[..., 0] - lse[..., 0]
    loss = float(-np.sum(picked, where=mask, dtype=np.float64) / n)
    dlogits = np.exp(z - lse)
    sub = np.zeros_like(dlogits)
    np.put_along_axis(sub, np.where(mask, targets, 0)[..., None], 1.0, axis=-1)
    dlogits = (dlogits - sub) * (mask[..., None] / n)
    return loss, dlogits.astype(logits.dtype)


def token_ce_loss(logits: np.ndarray, tags: np.ndarray,
                  ) -> tuple[float, np.ndarray]:
    """Token-classification loss over non-IGNORE positions."""
    return softmax_xent(logits, tags)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def schedule_lr(cfg: TrainConfig, step: int, total_steps: int) -> float:
    if cfg.schedule == "constant":
        return cfg.learning_rate
    return cfg.learning_rate * max(0.0, 1.0 - step / max(1, total_steps))


def adam_step(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, step: int, cfg: TrainConfig,
              total_steps: int) -> None:
    """One in-place Adam update; ``step`` is 1-based.

    Raises NonFiniteGradient (before touching any parameter) if a gradient
    contains NaN/Inf.  Weight decay is decoupled and skipped for 1-D
    tensors (biases, layernorm).
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient for {name}")
    lr = schedule_lr(cfg, step, total_steps)
    c1 = 1.0 - ADAM_BETA1 ** step
    c2 = 1.0 - ADAM_BETA2 ** step
    for name, g in grads.items():
        p = tensors[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p)
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        update = (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        if cfg.weight_decay and p.ndim >= 2:
            update = update + cfg.weight_decay * p
        p -= lr * update


# ---------------------------------------------------------------------------
# batch streams
# ---------------------------------------------------------------------------

def _cycler(n: int, rng: np.random.Generator) -> Iterator[int]:
    while True:
        for i in rng.permutation(n):
            yield int(i)


def mixed_index_stream(n_gold: int, n_silver: int, batch_size: int,
                       silver_per_batch: int, epochs: int, seed: int,
                       ) -> Iterator[tuple[list[int], list[int]]]:
    """Yield (gold indices, silver indices) per batch.

    The side that fills the non-silver share defines the epoch: one epoch
    is one shuffled pass with the remainder dropped (or a single short
    batch when the corpus is smaller than the per-batch share).  The other
    side cycles independently so differing corpus sizes never starve one
    another.
    """
    gold_per_batch = batch_size - silver_per_batch
    ss = np.random.SeedSequence(seed)
    gold_rng, silver_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    silver_cycle = _cycler(n_silver, silver_rng) if n_silver else None

    if gold_per_batch > 0:
        take = min(gold_per_batch, n_gold)
        steps = max(1, n_gold // gold_per_batch) if n_gold >= gold_per_batch else 1
        for _ in range(epochs):
            perm = gold_rng.permutation(n_gold)
            for s in range(steps):
                gold_ids = [int(i) for i in perm[s * take:(s + 1) * take]]
                silver_ids = [next(silver_cycle)
                              for _ in range(silver_per_batch)] if silver_per_batch else []
                yield gold_ids, silver_ids
    else:
        # pure-silver batches: the silver pass defines the epoch
        take = min(batch_size, n_silver)
        steps = max(1, n_silver // batch_size) if n_silver >= batch_size else 1
        for _ in range(epochs):
            perm = silver_rng.permutation(n_silver)
            for s in range(steps):
                yield [], [int(i) for i in perm[s * take:(s + 1) * take]]


def stream_length(n_gold: int, n_silver: int, batch_size: int,
                  silver_per_batch: int, epochs: int) -> int:
    gold_per_batch = batch_size - silver_per_batch
    if gold_per_batch > 0:
        steps = max(1, n_gold // gold_per_batch) if n_gold >= gold_per_batch else 1
    else:
        steps = max(1, n_silver // batch_size) if n_silver >= batch_size else 1
    return epochs * steps


# ---------------------------------------------------------------------------
# prediction / evaluation helpers
# ---------------------------------------------------------------------------

def _encode_all(seqs: Sequence[LabeledSequence], vocab: Vocab,
                max_positions: int) -> list[tuple[Encoding, np.ndarray]]:
    return [encode(s, vocab, max_positions, pad=False) for s in seqs]


def predict_word_tags(ckpt: Checkpoint, vocab: Vocab,
                      word_seqs: Sequence[Sequence[str]],
                      batch_size: int = 64,
                      ) -> tuple[list[list[str]], float]:
    """Argmax tag per word from first-subword logits, plus mean confidence."""
    dummy = [LabeledSequence(words=list(ws), tags=[_corpus.TAG_O] * len(ws))
             for ws in word_seqs]
    encoded = _encode_all(dummy, vocab, ckpt.config.max_positions)
    tags_out: list[list[str]] = []
    conf_sum, conf_n = 0.0, 0
    for lo in range(0, len(encoded), batch_size):
        chunk = encoded[lo:lo + batch_size]
        batch = pad_batch(chunk)
        logits = forward(ckpt, batch)
        z = logits - logits.max(axis=-1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=-1, keepdims=True)
        for r in range(len(chunk)):
            n_words = len(dummy[lo + r].words)
            row_tags = [_corpus.TAG_O] * n_words
            for pos, wi in first_subword_positions(batch.word_index[r]):
                best = int(np.argmax(logits[r, pos]))
                row_tags[wi] = _corpus.TAGS[best]
                conf_sum += float(probs[r, pos, best])
                conf_n += 1
            tags_out.append(row_tags)
    return tags_out, (conf_sum / conf_n if conf_n else 0.0)


def eval_f1(ckpt: Checkpoint, vocab: Vocab,
            dev: Sequence[LabeledSequence]):
    """Dev-set EvalReport via first-subword readout."""
    from .metrics import token_prf  # local import: metrics sits above training
    pred, _ = predict_word_tags(ckpt, vocab, [s.words for s in dev])
    return token_prf(pred, dev)


# ---------------------------------------------------------------------------
# fine-tuning
# ---------------------------------------------------------------------------

def finetune(ckpt: Checkpoint, vocab: Vocab,
             gold: Sequence[LabeledSequence],
             dev: Sequence[LabeledSequence],
             cfg: TrainConfig,
             silver: Sequence[LabeledSequence] = (),
             silver_per_batch: int = 0,
             history_extra: dict[str, Any] | None = None,
             ) -> tuple[Checkpoint, list[dict[str, Any]]]:
    """Epoch loop with seeded shuffling; returns the best-dev-F1 checkpoint.

    ``silver``/``silver_per_batch`` feed the batch mixer (self-training);
    plain fine-tuning leaves them empty, which is bit-identical to a
    silver fraction of zero.
    """
    if not gold and silver_per_batch < cfg.batch_size:
        raise ValueError("empty training set")
    if silver_per_batch > 0 and not silver:
        raise EmptySilverWithPositivePct(
            f"{silver_per_batch} silver examples per batch requested "
            "but the silver corpus is empty")
    if silver_per_batch < 0 or silver_per_batch > cfg.batch_size:
        raise ValueError("silver_per_batch outside [0, batch_size]")
    model = ckpt.copy()
    model.meta.setdefault("vocab_digest", vocab.digest())
    history: list[dict[str, Any]] = []
    if cfg.epochs == 0:
        return model, history

    P = model.config.max_positions
    enc_gold = _encode_all(gold, vocab, P)
    enc_silver = _encode_all(silver, vocab, P) if len(silver) else []
    total = stream_length(len(gold), len(silver), cfg.batch_size,
                          silver_per_batch, cfg.epochs)
    steps_per_epoch = total // cfg.epochs
    stream = mixed_index_stream(len(gold), len(silver), cfg.batch_size,
                                silver_per_batch, cfg.epochs, cfg.seed)
    drop_rng = np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    state = AdamState()
    best: Checkpoint | None = None
    best_f1 = -1.0
    extra = history_extra or {}

    def dev_eval(step: int) -> None:
        nonlocal best, best_f1
        if not dev:
            return
        rep = eval_f1(model, vocab, dev)
        history.append({"step": step, "split": "dev", "loss": None,
                        "precision": rep.precision, "recall": rep.recall,
                        "f1": rep.f1, **extra})
        if rep.f1 > best_f1:
            best_f1 = rep.f1
            best = model.copy()

    for step, (gold_ids, silver_ids) in enumerate(stream, start=1):
        items = [enc_gold[i] for i in gold_ids] + [enc_silver[j] for j in silver_ids]
        batch = pad_batch(items)
        logits, cache = classifier_loss_forward(model, batch, True, drop_rng)
        loss, dlogits = token_ce_loss(logits, batch.tags)
        grads = classifier_loss_backward(model, cache, dlogits)
        adam_step(model.tensors, grads, state, step, cfg, total)
        history.append({"step": step, "split": "train", "loss": loss,
                        "precision": None, "recall": None, "f1": None, **extra})
        at_eval = (step % cfg.eval_every == 0) if cfg.eval_every > 0 \
            else (step % steps_per_epoch == 0)
        if at_eval or step == total:
            dev_eval(step)

    return (best if best is not None else model), history


# ---------------------------------------------------------------------------
# pretraining
# ---------------------------------------------------------------------------

@dataclass
class PretrainBatch:
    batch: Batch
    mlm_rows: np.ndarray
    mlm_cols: np.ndarray
    mlm_targets: np.ndarray
    nsp_labels: np.ndarray


def make_pretrain_batches(docs: Sequence[Sequence[Sequence[str]]],
                          vocab: Vocab, batch_size: int,
                          max_positions: int = 128,
                          mask_prob: float = 0.15,
                          seed: int = 0) -> Iterator[PretrainBatch]:
    """Endless stream of NSP sentence pairs with BERT-style masking.

    Pairs are 50% true-next within a document, otherwise a random sentence
    from a different document.  Of masked positions 80% become [MASK], 10%
    a random token, 10% stay.  A corpus without any second document or
    consecutive pair degenerates to self-pairs labeled IsNext (warned once).
    """
    sents: list[list[list[int]]] = []
    for doc in docs:
        toks = []
        for sent in doc:
            ids = [tid for w in sent for tid in tokenize(str(w), vocab)]
            if ids:
                toks.append(ids)
        if toks:
            sents.append(toks)
    if not sents:
        raise ValueError("no non-empty documents for pretraining")
    n_docs = len(sents)
    total_sents = sum(len(d) for d in sents)
    degenerate = total_sents == 1
    if degenerate:
        warnings.warn("single-sentence corpus: NSP stream degenerates to "
                      "IsNext self-pairs", stacklevel=2)

    rng = np.random.default_rng(seed)
    budget = max_positions - 3  # [CLS] A [SEP] B [SEP]
    rand_lo = 5  # never inject specials as random replacements

    def random_other(d_idx: int) -> tuple[int, int]:
        if n_docs == 1:
            d = d_idx
        else:
            d = int(rng.integers(0, n_docs - 1))
            if d >= d_idx:
                d += 1
        return d, int(rng.integers(0, len(sents[d])))

    while True:
        pairs: list[tuple[tuple[int, int], tuple[int, int], int]] = []
        for d_idx, doc in enumerate(sents):
            for j in range(len(doc)):
                if degenerate:
                    pairs.append(((d_idx, j), (d_idx, j), NSP_IS_NEXT))
                    continue
                if j + 1 < len(doc) and rng.random() < 0.5:
                    pairs.append(((d_idx, j), (d_idx, j + 1), NSP_IS_NEXT))
                else:
                    pairs.append(((d_idx, j), random_other(d_idx), NSP_NOT_NEXT))
        order = rng.permutation(len(pairs))
        for lo in range(0, len(order), batch_size):
            sel = order[lo:lo + batch_size]
            if len(sel) == 0:
                continue
            encs: list[tuple[Encoding, np.ndarray]] = []
            rows, cols, targets, labels = [], [], [], []
            for r, pidx in enumerate(sel):
                (da, ja), (db, jb), label = pairs[int(pidx)]
                a = list(sents[da][ja])
                b = list(sents[db][jb])
                while len(a) + len(b) > budget:
                    (a if len(a) >= len(b) else b).pop()
                if not a or not b:
                    a = a or [vocab.id("[UNK]")]
                    b = b or [vocab.id("[UNK]")]
                ids = [CLS_ID] + a + [SEP_ID] + b + [SEP_ID]
                seg = [0] * (len(a) + 2) + [1] * (len(b) + 1)
                ids_arr = np.asarray(ids, dtype=np.int32)
                candidates = [k for k, t in enumerate(ids)
                              if t not in (CLS_ID, SEP_ID)]
                for k in candidates:
                    if rng.random() >= mask_prob:
                        continue
                    rows.append(r)
                    cols.append(k)
                    targets.append(int(ids_arr[k]))
                    u = rng.random()
                    if u < 0.8:
                        ids_arr[k] = MASK_ID
                    elif u < 0.9:
                        ids_arr[k] = int(rng.integers(rand_lo, len(vocab)))
                enc = Encoding(ids=ids_arr,
                               word_index=np.full(len(ids), -1, dtype=np.int32),
                               attention_mask=np.ones(len(ids), dtype=np.int8),
                               segment_ids=np.asarray(seg, dtype=np.int32))
                encs.append((enc, np.full(len(ids), -1, dtype=np.int32)))
                labels.append(label)
            yield PretrainBatch(
                batch=pad_batch(encs),
                mlm_rows=np.asarray(rows, dtype=np.int64),
                mlm_cols=np.asarray(cols, dtype=np.int64),
                mlm_targets=np.asarray(targets, dtype=np.int64),
                nsp_labels=np.asarray(labels, dtype=np.int64))


def pretrain(ckpt: Checkpoint, docs: Sequence[Sequence[Sequence[str]]],
             steps: int, cfg: TrainConfig, vocab: Vocab,
             max_positions: int = 128,
             ) -> tuple[list[Checkpoint], list[dict[str, Any]]]:
    """Joint MLM+NSP training, linear-to-zero schedule, periodic snapshots.

    Emits a checkpoint copy every ``cfg.eval_every`` steps (and at the end)
    for downstream selection by fine-tuned dev F1.
    """
    every = cfg.eval_every if cfg.eval_every > 0 else steps
    if steps < every:
        raise ValueError(f"steps {steps} < eval_every {every}")
    model = ckpt.copy()
    model.meta.setdefault("vocab_digest", vocab.digest())
    stream = make_pretrain_batches(docs, vocab, cfg.batch_size,
                                   max_positions=max_positions, seed=cfg.seed)
    drop_rng = np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    state = AdamState()
    snapshots: list[Checkpoint] = []
    history: list[dict[str, Any]] = []
    for step in range(1, steps + 1):
        pb = next(stream)
        mlm_logits, nsp_logits, cache = pretrain_loss_forward(
            model, pb.batch, (pb.mlm_rows, pb.mlm_cols), True, drop_rng)
        if len(pb.mlm_targets):
            mlm_loss, d_mlm = softmax_xent(mlm_logits, pb.mlm_targets)
        else:
            mlm_loss, d_mlm = 0.0, np.zeros_like(mlm_logits)
        nsp_loss, d_nsp = softmax_xent(nsp_logits, pb.nsp_labels)
        grads = pretrain_loss_backward(model, cache, d_mlm, d_nsp)
        adam_step(model.tensors, grads, state, step, cfg, steps)
        history.append({"step": step, "split": "train",
                        "loss": mlm_loss + nsp_loss, "mlm_loss": mlm_loss,
                        "nsp_loss": nsp_loss, "precision": None,
                        "recall": None, "f1": None})
        if step % every == 0 or step == steps:
            snapshots.append(model.copy())
    return snapshots, history


# ---------------------------------------------------------------------------
# hyper-parameter sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    best_params: dict[str, Any]
    best_score: float
    trials: list[tuple[dict[str, Any], float]]


def sweep(space: dict[str, Sequence[Any]], trials: int, seed: int,
          run_trial: Callable[[dict[str, Any]], float]) -> SweepResult:
    """Seeded random search over a small grid; argmax dev F1.

    Evaluates at most ``trials`` grid points (all of them when the grid is
    small enough); ties break toward the earliest evaluated trial.
    """
    if not space or any(len(v) == 0 for v in space.values()):
        raise ValueError("sweep space must be non-empty")
    keys = sorted(space)
    grid = [dict(zip(keys, combo))
            for combo in itertools.product(*(space[k] for k in keys))]
    if len(grid) > trials:
        rng = np.random.default_rng(seed)
        chosen = sorted(rng.choice(len(grid), size=trials, replace=False))
        grid = [grid[int(i)] for i in chosen]
    results: list[tuple[dict[str, Any], float]] = []
    best_i = 0
    for i, params in enumerate(grid):
        score = run_trial(params)
        results.append((params, score))
        if score > results[best_i][1]:
            best_i = i
    return SweepResult(best_params=results[best_i][0],
                       best_score=results[best_i][1], trials=results)


# ---------------------------------------------------------------------------
# history records
# ---------------------------------------------------------------------------

def save_history(path: str | Path, history: Sequence[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in history:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_history(path: str | Path) -> list[dict[str, Any]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
