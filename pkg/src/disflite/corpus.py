"""Disfluency corpora: annotation parsing, preprocessing, labeling, and synthesis.

Annotations use whitespace-delimited bracket notation::

    [ it's + { uh } it's ] almost

where ``[`` opens a disfluency, words up to ``+`` form the reparandum,
an optional ``{ ... }`` group right after ``+`` is the interregnum, the
remaining words up to ``]`` are the repair.  A ``{ ... }`` group outside
any brackets marks a standalone interregnum (discourse filler).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInputCorpus,
    EmptyReparandum,
    MisplacedInterruptionPoint,
    UnbalancedMarkers,
    UnsortedInput,
)

MARKERS = ("[", "+", "{", "}", "]")

#: Lexical fillers removed during preprocessing (matched case-insensitively
#: after comma stripping).
FILLED_PAUSES = frozenset({"uh", "huh", "uh-huh", "um"})

#: Discourse-marker phrases the synthesizer may insert as interregna.
INTERREGNUM_PHRASES = ("you know", "i mean", "well")

TAG_O = "O"
TAG_RM = "RM"
TAG_IM = "IM"
TAGS = (TAG_O, TAG_RM, TAG_IM)
TAG_TO_ID = {t: i for i, t in enumerate(TAGS)}


class LabelScheme(Enum):
    REPARANDUM_ONLY = "reparandum-only"
    REPARANDUM_PLUS_INTERREGNUM = "joint"


class Origin(Enum):
    GOLD = "gold"
    SILVER = "silver"
    SYNTHETIC = "synthetic"


Range = tuple[int, int]


@dataclass(frozen=True)
class DisfluencySpan:
    """Half-open word-index ranges of one disfluency.

    ``reparandum`` may be empty ``(i, i)`` only for a standalone
    interregnum span (a filler with nothing to delete around it).
    """

    reparandum: Range
    interregnum: Range | None = None
    repair: Range | None = None

    def __post_init__(self):
        for name, rng in (("reparandum", self.reparandum),
                          ("interregnum", self.interregnum),
                          ("repair", self.repair)):
            if rng is not None and rng[0] > rng[1]:
                raise ValueError(f"{name} range {rng} is reversed")
        if self.reparandum[0] == self.reparandum[1] and self.interregnum is None:
            raise ValueError("span with empty reparandum must carry an interregnum")

    @property
    def standalone_interregnum(self) -> bool:
        return self.reparandum[0] == self.reparandum[1]


@dataclass
class AnnotatedSentence:
    words: list[str]
    spans: list[DisfluencySpan] = field(default_factory=list)
    doc_id: str = ""
    speaker: str | None = None
    timestamp: float | None = None

    def validate(self) -> None:
        """Check index bounds, region order, and same-kind non-overlap."""
        n = len(self.words)
        seen: dict[str, list[Range]] = {"reparandum": [], "interregnum": [], "repair": []}
        for span in self.spans:
            prev_end = None
            for kind, rng in (("reparandum", span.reparandum),
                              ("interregnum", span.interregnum),
                              ("repair", span.repair)):
                if rng is None:
                    continue
                if not (0 <= rng[0] <= rng[1] <= n):
                    raise ValueError(f"{kind} range {rng} out of bounds for {n} words")
                if prev_end is not None and rng[0] < prev_end:
                    raise ValueError(f"{kind} range {rng} precedes earlier region")
                prev_end = rng[1]
                if rng[0] < rng[1]:
                    seen[kind].append(rng)
        for kind, ranges in seen.items():
            ranges.sort()
            for a, b in zip(ranges, ranges[1:]):
                if b[0] < a[1]:
                    raise ValueError(f"overlapping {kind} ranges {a} and {b}")


@dataclass
class LabeledSequence:
    words: list[str]
    tags: list[str]
    origin: Origin = Origin.GOLD
    doc_id: str | None = None

    def __post_init__(self):
        if len(self.words) != len(self.tags):
            raise ValueError(
                f"{len(self.words)} words but {len(self.tags)} tags")
        for t in self.tags:
            if t not in TAG_TO_ID:
                raise ValueError(f"unknown tag {t!r}")


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    docs: int
    words: int
    disfluent_sentences: int
    disfluent_spans: int


class DisfluencyType(Enum):
    REPETITION = "repetition"
    RESTART = "restart"
    INTERREGNUM_INSERT = "interregnum"
    FILLED_PAUSE_INSERT = "filled-pause"


@dataclass(frozen=True)
class SynthParams:
    p_disfluent: float = 0.5
    type_weights: dict[DisfluencyType, float] = field(
        default_factory=lambda: {
            DisfluencyType.REPETITION: 0.45,
            DisfluencyType.RESTART: 0.2,
            DisfluencyType.INTERREGNUM_INSERT: 0.25,
            DisfluencyType.FILLED_PAUSE_INSERT: 0.1,
        })
    max_reparandum_len: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_disfluent <= 1.0:
            raise ValueError(f"p_disfluent {self.p_disfluent} outside [0, 1]")
        if any(w < 0 for w in self.type_weights.values()):
            raise ValueError("type weights must be non-negative")
        if not any(w > 0 for w in self.type_weights.values()):
            raise ValueError("at least one type weight must be positive")
        if self.max_reparandum_len < 1:
            raise ValueError("max_reparandum_len must be >= 1")


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------

def parse_annotation(text: str) -> AnnotatedSentence:
    """Parse one bracket-notation line into words plus disfluency spans.

    Nested ``[ ... ]`` groups are accepted and flattened into the outermost
    span: everything the outer bracket marks for deletion is deletion
    material, so inner structure contributes words only.
    """
    toks = text.split()
    words: list[str] = []
    spans: list[DisfluencySpan] = []
    pos = 0

    def parse_interregnum() -> Range:
        # called after consuming "{"
        nonlocal pos
        start = len(words)
        while pos < len(toks):
            t = toks[pos]
            if t == "}":
                pos += 1
                return (start, len(words))
            if t in MARKERS:
                raise UnbalancedMarkers(f"unexpected {t!r} inside {{ }} group")
            words.append(t)
            pos += 1
        raise UnbalancedMarkers("missing '}'")

    def parse_group(depth: int) -> tuple[Range, Range | None, Range | None]:
        # called after consuming "["
        nonlocal pos
        rep_start = len(words)
        rep_end: int | None = None
        interregnum: Range | None = None
        while pos < len(toks):
            t = toks[pos]
            if t == "]":
                pos += 1
                if rep_end is None:
                    raise MisplacedInterruptionPoint("group closed without '+'")
                repair: Range | None = (interregnum[1] if interregnum else rep_end,
                                        len(words))
                if repair[0] == repair[1]:
                    repair = None
                return (rep_start, rep_end), interregnum, repair
            if t == "+":
                if rep_end is not None:
                    raise MisplacedInterruptionPoint("second '+' in one group")
                if len(words) == rep_start:
                    raise EmptyReparandum("no words before '+'")
                rep_end = len(words)
                pos += 1
            elif t == "{":
                pos += 1
                rng = parse_interregnum()
                # only the group immediately after '+' is the interregnum;
                # anything else flattens to plain words of this region
                if rep_end is not None and interregnum is None and rng[0] == rep_end:
                    if rng[0] < rng[1]:
                        interregnum = rng
                else:
                    pass
            elif t == "[":
                pos += 1
                parse_group(depth + 1)  # nested edit: words only
            elif t == "}":
                raise UnbalancedMarkers("'}' without '{'")
            else:
                words.append(t)
                pos += 1
        raise UnbalancedMarkers("missing ']'")

    while pos < len(toks):
        t = toks[pos]
        if t == "[":
            pos += 1
            rep, interregnum, repair = parse_group(0)
            spans.append(DisfluencySpan(rep, interregnum, repair))
        elif t == "{":
            pos += 1
            rng = parse_interregnum()
            if rng[0] < rng[1]:
                spans.append(DisfluencySpan((rng[0], rng[0]), rng, None))
        elif t == "+":
            raise MisplacedInterruptionPoint("'+' outside [ ] group")
        elif t in ("]", "}"):
            raise UnbalancedMarkers(f"{t!r} without opener")
        else:
            words.append(t)
            pos += 1

    sent = AnnotatedSentence(words=words, spans=spans)
    sent.validate()
    return sent


def serialize_annotation(s: AnnotatedSentence) -> str:
    """Render an AnnotatedSentence back to bracket notation.

    Requires each span's regions to be adjacent (reparandum, then
    interregnum, then repair with no gaps), which holds for everything the
    parser or synthesizer produces.
    """
    opens: dict[int, list[str]] = {}
    closes: dict[int, list[str]] = {}
    for span in sorted(s.spans, key=lambda sp: (sp.reparandum[0], sp.reparandum[1])):
        rep, inter, repair = span.reparandum, span.interregnum, span.repair
        if inter is not None and inter[0] != rep[1]:
            raise ValueError("interregnum not adjacent to reparandum")
        if repair is not None and repair[0] != (inter[1] if inter else rep[1]):
            raise ValueError("repair not adjacent to preceding region")
        if span.standalone_interregnum:
            assert inter is not None
            opens.setdefault(inter[0], []).append("{")
            closes.setdefault(inter[1], []).insert(0, "}")
            continue
        opens.setdefault(rep[0], []).append("[")
        closes.setdefault(rep[1], []).insert(0, "+")
        if inter is not None:
            opens.setdefault(inter[0], []).append("{")
            closes.setdefault(inter[1], []).insert(0, "}")
        end = repair[1] if repair else (inter[1] if inter else rep[1])
        closes.setdefault(end, []).append("]")

    out: list[str] = []
    for i in range(len(s.words) + 1):
        # '+' and '}' close at the same index an opener may start at
        out.extend(closes.get(i, []))
        out.extend(opens.get(i, []))
        if i < len(s.words):
            out.append(s.words[i])
    return " ".join(out)


# ---------------------------------------------------------------------------
# preprocessing and labeling
# ---------------------------------------------------------------------------

def preprocess(s: AnnotatedSentence,
               remove_commas: bool = True,
               filled_pauses: frozenset[str] | set[str] = FILLED_PAUSES,
               ) -> AnnotatedSentence:
    """Strip commas and delete filled-pause words, remapping span indices.

    A span whose interregnum empties keeps going without one; a span whose
    reparandum empties is dropped entirely (a disfluency with nothing to
    delete is undefined).  Total function: never raises.
    """
    surface = [w.replace(",", "") if remove_commas else w for w in s.words]
    keep = [bool(w) and w.lower() not in filled_pauses for w in surface]
    new_words = [w for w, k in zip(surface, keep) if k]

    # prefix[i] = number of kept words strictly before index i
    prefix = [0]
    for k in keep:
        prefix.append(prefix[-1] + int(k))

    def remap(rng: Range | None) -> Range | None:
        if rng is None:
            return None
        new = (prefix[rng[0]], prefix[rng[1]])
        return new if new[0] < new[1] else None

    new_spans: list[DisfluencySpan] = []
    for span in s.spans:
        rep = remap(span.reparandum)
        inter = remap(span.interregnum)
        repair = remap(span.repair)
        if span.standalone_interregnum:
            if inter is not None:
                pivot = prefix[span.reparandum[0]]
                new_spans.append(DisfluencySpan((pivot, pivot), inter, repair))
            continue
        if rep is None:
            continue
        new_spans.append(DisfluencySpan(rep, inter, repair))

    out = AnnotatedSentence(words=new_words, spans=new_spans,
                            doc_id=s.doc_id, speaker=s.speaker,
                            timestamp=s.timestamp)
    out.validate()
    return out


def to_labels(s: AnnotatedSentence, scheme: LabelScheme,
              origin: Origin = Origin.GOLD) -> LabeledSequence:
    """Convert spans to per-word tags: RM for reparanda, IM for interregna."""
    tags = [TAG_O] * len(s.words)
    for span in s.spans:
        if scheme is LabelScheme.REPARANDUM_PLUS_INTERREGNUM and span.interregnum:
            for i in range(*span.interregnum):
                tags[i] = TAG_IM
    for span in s.spans:
        for i in range(*span.reparandum):
            tags[i] = TAG_RM
    return LabeledSequence(words=list(s.words), tags=tags, origin=origin,
                           doc_id=s.doc_id or None)


# ---------------------------------------------------------------------------
# utterance merging
# ---------------------------------------------------------------------------

@dataclass
class MergedDoc:
    speaker: str
    start: float
    words: list[str]


def merge_utterances(turns: Sequence[tuple[str, float, str]],
                     max_gap: float = 10.0,
                     max_len: int = 512) -> list[MergedDoc]:
    """Re-join one speaker's utterances split by interjections or pauses.

    ``turns`` are (speaker, start_seconds, text) sorted by start time within
    one conversation.  Consecutive turns of the same speaker merge across
    other speakers' interjections while the start-time gap stays within
    ``max_gap`` and the merged length within ``max_len`` words.  Output is
    ordered by each document's first-utterance timestamp.
    """
    last_ts = None
    for _, ts, _ in turns:
        if last_ts is not None and ts < last_ts:
            raise UnsortedInput(f"timestamp {ts} after {last_ts}")
        last_ts = ts

    docs: list[MergedDoc] = []
    open_doc: dict[str, MergedDoc] = {}
    open_ts: dict[str, float] = {}
    for speaker, ts, text in turns:
        words = text.split()
        doc = open_doc.get(speaker)
        if (doc is not None
                and ts - open_ts[speaker] <= max_gap
                and len(doc.words) + len(words) <= max_len):
            doc.words.extend(words)
        else:
            doc = MergedDoc(speaker=speaker, start=ts, words=list(words))
            docs.append(doc)
            open_doc[speaker] = doc
        open_ts[speaker] = ts
    docs.sort(key=lambda d: d.start)
    return docs


# ---------------------------------------------------------------------------
# synthetic disfluency generation
# ---------------------------------------------------------------------------

def _insert_words(sent: AnnotatedSentence, pos: int, new: list[str]) -> None:
    """Insert words at ``pos`` and shift span ranges accordingly."""
    m = len(new)
    sent.words[pos:pos] = new

    def shift(rng: Range | None) -> Range | None:
        if rng is None:
            return None
        a, b = rng
        return (a + m if a >= pos else a, b + m if b > pos else b)

    sent.spans = [
        DisfluencySpan(shift(sp.reparandum), shift(sp.interregnum), shift(sp.repair))
        for sp in sent.spans
    ]


def _free_positions(sent: AnnotatedSentence) -> list[int]:
    """Insertion points strictly outside every span's footprint.

    Inserting inside a footprint (even at region boundaries) would be
    indistinguishable from that span's own interregnum in bracket notation.
    """
    blocked: set[int] = set()
    for sp in sent.spans:
        ends = [sp.reparandum[1]]
        if sp.interregnum:
            ends.append(sp.interregnum[1])
        if sp.repair:
            ends.append(sp.repair[1])
        blocked.update(range(sp.reparandum[0] + 1, max(ends)))
    return [i for i in range(len(sent.words) + 1) if i not in blocked]


def _apply_repetition(sent: AnnotatedSentence, rng: np.random.Generator,
                      max_len: int) -> DisfluencySpan:
    n = len(sent.words)
    w = int(rng.integers(1, min(max_len, n) + 1))
    start = int(rng.integers(0, n - w + 1))
    window = sent.words[start:start + w]
    _insert_words(sent, start + w, list(window))
    span = DisfluencySpan((start, start + w), None, (start + w, start + 2 * w))
    sent.spans.append(span)
    return span


def _apply_restart(sent: AnnotatedSentence, rng: np.random.Generator,
                   max_len: int, fluent: Sequence[Sequence[str]],
                   self_idx: int) -> DisfluencySpan:
    if len(fluent) > 1:
        j = int(rng.integers(0, len(fluent) - 1))
        if j >= self_idx:
            j += 1
    else:
        j = self_idx
    other = fluent[j]
    p = int(rng.integers(1, min(max_len, len(other)) + 1))
    _insert_words(sent, 0, [str(w) for w in other[:p]])
    span = DisfluencySpan((0, p), None, None)
    sent.spans.append(span)
    return span


def _apply_filler(sent: AnnotatedSentence, rng: np.random.Generator,
                  phrase: list[str]) -> None:
    """Insert a filler phrase: interregnum of an open disfluency if one has
    room for it, otherwise a standalone IM span at a free position."""
    for k, sp in enumerate(sent.spans):
        if sp.repair is not None and sp.interregnum is None:
            pos = sp.reparandum[1]
            _insert_words(sent, pos, phrase)
            sp2 = sent.spans[k]
            sent.spans[k] = DisfluencySpan(
                sp2.reparandum, (pos, pos + len(phrase)),
                (sp2.repair[0], sp2.repair[1]) if sp2.repair else None)
            return
    positions = _free_positions(sent)
    pos = int(positions[rng.integers(0, len(positions))])
    _insert_words(sent, pos, phrase)
    sent.spans.append(DisfluencySpan((pos, pos), (pos, pos + len(phrase)), None))


def generate_synthetic(fluent: Sequence[Sequence[str]],
                       params: SynthParams) -> list[AnnotatedSentence]:
    """Insert simulated disfluencies into fluent sentences.

    Deterministic given ``params.seed``; each sentence gets its own derived
    RNG keyed by index, so results do not depend on processing order or
    worker count.
    """
    if len(fluent) == 0:
        raise EmptyInputCorpus("no fluent sentences to augment")

    types = sorted(params.type_weights, key=lambda t: t.value)
    weights = np.array([params.type_weights[t] for t in types], dtype=np.float64)
    weights /= weights.sum()

    out: list[AnnotatedSentence] = []
    for i, src in enumerate(fluent):
        rng = np.random.default_rng(np.random.SeedSequence(params.seed, spawn_key=(i,)))
        sent = AnnotatedSentence(words=[str(w) for w in src], doc_id=f"synth-{i}")
        if len(sent.words) == 0 or rng.random() >= params.p_disfluent:
            out.append(sent)
            continue

        kind = types[int(rng.choice(len(types), p=weights))]
        if kind is DisfluencyType.REPETITION:
            _apply_repetition(sent, rng, params.max_reparandum_len)
            # sometimes a filler lands at the interruption point
            if rng.random() < 0.3:
                phrase = _pick_filler(rng)
                _apply_filler(sent, rng, phrase)
        elif kind is DisfluencyType.RESTART:
            _apply_restart(sent, rng, params.max_reparandum_len, fluent, i)
        elif kind is DisfluencyType.INTERREGNUM_INSERT:
            phrase = INTERREGNUM_PHRASES[int(rng.integers(0, len(INTERREGNUM_PHRASES)))]
            _apply_filler(sent, rng, phrase.split())
        else:
            pauses = sorted(FILLED_PAUSES)
            word = pauses[int(rng.integers(0, len(pauses)))]
            _apply_filler(sent, rng, [word])
        sent.validate()
        out.append(sent)
    return out


def _pick_filler(rng: np.random.Generator) -> list[str]:
    if rng.random() < 0.5:
        phrase = INTERREGNUM_PHRASES[int(rng.integers(0, len(INTERREGNUM_PHRASES)))]
        return phrase.split()
    pauses = sorted(FILLED_PAUSES)
    return [pauses[int(rng.integers(0, len(pauses)))]]


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def stats(corpus: Sequence[LabeledSequence],
          doc_ids: Sequence[str] | None = None) -> CorpusStats:
    """Corpus summary counts; spans are maximal contiguous non-O runs."""
    if doc_ids is not None and len(doc_ids) != len(corpus):
        raise ValueError("doc_ids must parallel the corpus")
    ids = doc_ids if doc_ids is not None else [s.doc_id for s in corpus]
    sentences = len(corpus)
    words = sum(len(s.words) for s in corpus)
    disfluent_sentences = 0
    spans = 0
    for s in corpus:
        in_run = False
        hit = False
        for t in s.tags:
            if t != TAG_O:
                hit = True
                if not in_run:
                    spans += 1
                    in_run = True
            else:
                in_run = False
        disfluent_sentences += int(hit)
    return CorpusStats(sentences=sentences,
                       docs=len({d for d in ids if d is not None}),
                       words=words,
                       disfluent_sentences=disfluent_sentences,
                       disfluent_spans=spans)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def read_annotations(path: str | Path) -> list[AnnotatedSentence]:
    """Read bracket-notation sentences, one per line; blank lines skipped."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                sent = parse_annotation(line)
            except (UnbalancedMarkers, MisplacedInterruptionPoint,
                    EmptyReparandum) as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
            out.append(sent)
    return out


def write_annotations(path: str | Path, sents: Iterable[AnnotatedSentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in sents:
            f.write(serialize_annotation(s) + "\n")


def read_labeled_tsv(path: str | Path,
                     origin: Origin = Origin.GOLD) -> list[LabeledSequence]:
    """Read `word<TAB>tag` lines; blank line ends a sentence, `# doc: <id>`
    comments set the document for following sentences."""
    seqs: list[LabeledSequence] = []
    words: list[str] = []
    tags: list[str] = []
    doc: str | None = None

    def flush():
        nonlocal words, tags
        if words:
            seqs.append(LabeledSequence(words=words, tags=tags,
                                        origin=origin, doc_id=doc))
            words, tags = [], []

    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                m = re.match(r"#\s*doc:\s*(.*)$", line)
                if m:
                    flush()
                    doc = m.group(1).strip() or None
                continue
            if not line.strip():
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in TAG_TO_ID:
                raise ValueError(
                    f"{path}:{lineno}: expected 'word<TAB>O|RM|IM', got {line!r}")
            words.append(parts[0])
            tags.append(parts[1])
    flush()
    return seqs


def write_labeled_tsv(path: str | Path, seqs: Iterable[LabeledSequence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        current_doc: str | None = None
        first = True
        for s in seqs:
            if not first:
                f.write("\n")
            if s.doc_id is not None and s.doc_id != current_doc:
                f.write(f"# doc: {s.doc_id}\n")
                current_doc = s.doc_id
            for w, t in zip(s.words, s.tags):
                f.write(f"{w}\t{t}\n")
            first = False


def read_turns_tsv(path: str | Path) -> dict[str, list[tuple[str, float, str]]]:
    """Read `conversation<TAB>speaker<TAB>start_seconds<TAB>text` rows,
    grouped by conversation in file order."""
    convs: dict[str, list[tuple[str, float, str]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, "
                    f"got {len(parts)}")
            conv, speaker, ts, text = parts
            try:
                start = float(ts)
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: bad start_seconds {ts!r}") from None
            convs.setdefault(conv, []).append((speaker, start, text))
    return convs


_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")


def split_sentences(text: str) -> list[str]:
    """Rule-based splitter: break after ./!/? followed by space + capital."""
    return [p for p in (s.strip() for s in _SENT_SPLIT.split(text)) if p]


# ---------------------------------------------------------------------------
# built-in fluent sampler (desk-scale data source)
# ---------------------------------------------------------------------------

_SUBJECTS = ("i", "you", "we", "they", "he", "she", "the cat", "the dog",
             "my friend", "the teacher", "a man", "the woman", "my sister",
             "the driver")
_MOTION_VERBS = ("went", "walked", "drove", "moved", "returned", "traveled",
                 "hurried", "wandered")
_PREPS = ("to", "from", "near", "behind", "around", "past")
_PLACES = ("the store", "the house", "the school", "the park", "the office",
           "the station", "the market", "the garden", "the library",
           "the bridge")
_TRANS_VERBS = ("saw", "found", "bought", "sold", "liked", "watched",
                "helped", "called", "visited", "remembered")
_OBJECTS = ("a book", "the car", "some food", "the movie", "a ticket",
            "the game", "a letter", "the picture", "some coffee", "the keys")
_TAILS = ("yesterday", "today", "last week", "this morning", "again",
          "after lunch", "before dinner", "")


def sample_fluent_sentences(n: int, seed: int = 0) -> list[list[str]]:
    """Sample fluent template sentences over a small closed vocabulary."""
    rng = np.random.default_rng(seed)
    out: list[list[str]] = []
    for _ in range(n):
        subj = _SUBJECTS[rng.integers(0, len(_SUBJECTS))]
        tail = _TAILS[rng.integers(0, len(_TAILS))]
        if rng.random() < 0.5:
            verb = _MOTION_VERBS[rng.integers(0, len(_MOTION_VERBS))]
            prep = _PREPS[rng.integers(0, len(_PREPS))]
            place = _PLACES[rng.integers(0, len(_PLACES))]
            sent = f"{subj} {verb} {prep} {place} {tail}"
        else:
            verb = _TRANS_VERBS[rng.integers(0, len(_TRANS_VERBS))]
            obj = _OBJECTS[rng.integers(0, len(_OBJECTS))]
            sent = f"{subj} {verb} {obj} {tail}"
        out.append(sent.split())
    return out
