"""WordPiece vocabulary training, greedy segmentation, and tag-aligned encoding.

Training is a likelihood-driven pair merger: starting from single
characters (word-initial ``c`` and continuation ``##c``), the pair with
the highest ``count(ab) / (count(a) * count(b))`` merges until the vocab
is full.  Words are lowercased before training and segmentation (uncased
models).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import TAG_TO_ID, LabeledSequence
from .errors import VocabTooSmall

SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)
CONTINUATION = "##"

#: Sentinel tag id for positions excluded from loss and metrics
#: ([CLS]/[SEP]/[PAD] and every subword after a word's first).
IGNORE_ID = -1

_MAX_WORD_CHARS = 200


@dataclass
class Vocab:
    tokens: list[str]
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if list(self.tokens[:5]) != list(SPECIALS):
            raise ValueError(f"first five tokens must be {SPECIALS}")
        self.token_to_id = {t: i for i, t in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def digest(self) -> str:
        payload = "\n".join(self.tokens).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t in self.tokens:
                f.write(t + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(tokens=tokens)


def _word_units(word: str) -> tuple[str, ...]:
    chars = list(word)
    return tuple([chars[0]] + [CONTINUATION + c for c in chars[1:]])


def _merge_units(units: tuple[str, ...], a: str, b: str,
                 merged: str) -> tuple[str, ...]:
    out: list[str] = []
    i = 0
    while i < len(units):
        if i + 1 < len(units) and units[i] == a and units[i + 1] == b:
            out.append(merged)
            i += 2
        else:
            out.append(units[i])
            i += 1
    return tuple(out)


def train_wordpiece(corpus: Iterable[Sequence[str]], vocab_size: int,
                    min_frequency: int = 2) -> Vocab:
    """Train a WordPiece vocabulary of at most ``vocab_size`` tokens.

    The alphabet (every corpus character, in both word-initial and ``##``
    continuation form) is always included so any corpus word stays
    segmentable; merges stop when the vocab is full or no pair reaches
    ``min_frequency``.
    """
    word_freq: Counter[str] = Counter()
    for sent in corpus:
        for w in sent:
            w = str(w).lower()
            if w:
                word_freq[w[:_MAX_WORD_CHARS]] += 1

    chars = sorted({c for w in word_freq for c in w})
    alphabet = chars + [CONTINUATION + c for c in chars]
    budget = vocab_size - len(SPECIALS) - len(alphabet)
    if budget < 0:
        raise VocabTooSmall(
            f"vocab_size {vocab_size} cannot hold {len(SPECIALS)} specials "
            f"plus alphabet of {len(alphabet)}")

    words = sorted(word_freq)  # fixed order for determinism
    freqs = [word_freq[w] for w in words]
    reps: list[tuple[str, ...]] = [_word_units(w) for w in words]

    unit_count: Counter[str] = Counter()
    pair_count: Counter[tuple[str, str]] = Counter()
    pair_words: dict[tuple[str, str], set[int]] = {}
    for idx, (units, f) in enumerate(zip(reps, freqs)):
        for u in units:
            unit_count[u] += f
        for p in zip(units, units[1:]):
            pair_count[p] += f
            pair_words.setdefault(p, set()).add(idx)

    merges: list[str] = []
    existing = set(SPECIALS) | set(alphabet)
    while len(merges) < budget:
        best: tuple[str, str] | None = None
        best_rank: tuple[float, int] | None = None
        for p, c in pair_count.items():
            if c < min_frequency:
                continue
            score = c / (unit_count[p[0]] * unit_count[p[1]])
            rank = (score, c)
            if (best_rank is None or rank > best_rank
                    or (rank == best_rank and p < best)):
                best, best_rank = p, rank
        if best is None:
            break
        a, b = best
        merged = a + (b[len(CONTINUATION):] if b.startswith(CONTINUATION) else b)

        affected = sorted(pair_words.get(best, ()))
        for idx in affected:
            units = reps[idx]
            f = freqs[idx]
            for u in units:
                unit_count[u] -= f
            for p in zip(units, units[1:]):
                pair_count[p] -= f
                if pair_count[p] <= 0:
                    del pair_count[p]
                s = pair_words.get(p)
                if s is not None:
                    s.discard(idx)
                    if not s:
                        del pair_words[p]
            new_units = _merge_units(units, a, b, merged)
            reps[idx] = new_units
            for u in new_units:
                unit_count[u] += f
            for p in zip(new_units, new_units[1:]):
                pair_count[p] += f
                pair_words.setdefault(p, set()).add(idx)
        # distinct merge routes can produce the same surface token; the
        # rewrite above still applies, but the vocab entry is added once
        if merged not in existing:
            merges.append(merged)
            existing.add(merged)

    return Vocab(tokens=list(SPECIALS) + alphabet + merges)


def tokenize(word: str, vocab: Vocab) -> list[int]:
    """Greedy longest-prefix-match segmentation; unsegmentable -> [UNK]."""
    word = word.lower()
    if not word or len(word) > _MAX_WORD_CHARS:
        return [UNK_ID]
    ids: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while end > start:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION + piece
            tid = vocab.token_to_id.get(piece)
            if tid is not None:
                found = tid
                break
            end -= 1
        if found is None:
            return [UNK_ID]
        ids.append(found)
        start = end
    return ids


def detokenize(ids: Sequence[int], vocab: Vocab) -> str:
    parts = []
    for i in ids:
        t = vocab.tokens[i]
        parts.append(t[len(CONTINUATION):] if t.startswith(CONTINUATION) else t)
    return "".join(parts)


@dataclass
class Encoding:
    """One sentence as token ids with word alignment.

    ``word_index[t]`` is the originating word for token ``t`` or -1 for
    specials/padding; ``attention_mask`` is 1 exactly on non-PAD positions.
    """

    ids: np.ndarray
    word_index: np.ndarray
    attention_mask: np.ndarray
    segment_ids: np.ndarray


def encode(seq: LabeledSequence, vocab: Vocab, max_positions: int = 512,
           pad: bool = True) -> tuple[Encoding, np.ndarray]:
    """Encode one labeled sentence as ``[CLS] w1... [SEP] [PAD]...``.

    Every subword inherits its word's tag; specials and pads carry
    IGNORE_ID.  Words are dropped whole from the right once their subwords
    would overflow ``max_positions - 2``.
    """
    if max_positions < 2:
        raise ValueError("max_positions must be >= 2")
    budget = max_positions - 2
    ids: list[int] = [CLS_ID]
    widx: list[int] = [-1]
    tags: list[int] = [IGNORE_ID]
    for wi, (word, tag) in enumerate(zip(seq.words, seq.tags)):
        sub = tokenize(word, vocab)
        if len(ids) - 1 + len(sub) > budget:
            break
        tag_id = TAG_TO_ID[tag]
        for k, sid in enumerate(sub):
            ids.append(sid)
            widx.append(wi)
            tags.append(tag_id if k == 0 else IGNORE_ID)
    ids.append(SEP_ID)
    widx.append(-1)
    tags.append(IGNORE_ID)
    n = len(ids)
    mask = [1] * n
    if pad and n < max_positions:
        extra = max_positions - n
        ids.extend([PAD_ID] * extra)
        widx.extend([-1] * extra)
        tags.extend([IGNORE_ID] * extra)
        mask.extend([0] * extra)
    enc = Encoding(ids=np.asarray(ids, dtype=np.int32),
                   word_index=np.asarray(widx, dtype=np.int32),
                   attention_mask=np.asarray(mask, dtype=np.int8),
                   segment_ids=np.zeros(len(ids), dtype=np.int32))
    return enc, np.asarray(tags, dtype=np.int32)


@dataclass
class Batch:
    """Padded batch arrays, all shaped (batch, positions)."""

    ids: np.ndarray
    attention_mask: np.ndarray
    segment_ids: np.ndarray
    word_index: np.ndarray
    tags: np.ndarray | None = None

    def __post_init__(self):
        for arr in (self.attention_mask, self.segment_ids, self.word_index):
            if arr.shape != self.ids.shape:
                raise ValueError("batch arrays must share one shape")
        if self.tags is not None and self.tags.shape != self.ids.shape:
            raise ValueError("tags shape differs from ids")

    def __len__(self) -> int:
        return self.ids.shape[0]


def pad_batch(encoded: Sequence[tuple[Encoding, np.ndarray]],
              length: int | None = None) -> Batch:
    """Stack variable-length encodings, right-padding to the longest."""
    if length is None:
        length = max(len(e.ids) for e, _ in encoded)
    n = len(encoded)
    ids = np.zeros((n, length), dtype=np.int32)  # 0 == PAD_ID
    mask = np.zeros((n, length), dtype=np.int8)
    seg = np.zeros((n, length), dtype=np.int32)
    widx = np.full((n, length), -1, dtype=np.int32)
    tags = np.full((n, length), IGNORE_ID, dtype=np.int32)
    for r, (enc, t) in enumerate(encoded):
        k = len(enc.ids)
        if k > length:
            raise ValueError(f"encoding of length {k} exceeds batch length {length}")
        ids[r, :k] = enc.ids
        mask[r, :k] = enc.attention_mask
        seg[r, :k] = enc.segment_ids
        widx[r, :k] = enc.word_index
        tags[r, :k] = t
    return Batch(ids=ids, attention_mask=mask, segment_ids=seg,
                 word_index=widx, tags=tags)


def first_subword_positions(word_index: np.ndarray) -> list[tuple[int, int]]:
    """(position, word) pairs of each word's first subword, in word order."""
    out: list[tuple[int, int]] = []
    prev = -1
    for pos, wi in enumerate(word_index.tolist()):
        if wi >= 0 and wi != prev:
            out.append((pos, wi))
        prev = wi
    return out
