"""Exception types shared across the toolkit."""


class DisfliteError(Exception):
    """Base class for all toolkit errors."""


# --- annotation / corpus ---

class UnbalancedMarkers(DisfliteError):
    """A bracket or brace marker was opened but never closed (or vice versa)."""


class MisplacedInterruptionPoint(DisfliteError):
    """A '+' marker outside a disfluency group, duplicated, or missing."""


class EmptyReparandum(DisfliteError):
    """A disfluency group contains no words before its interruption point."""


class UnsortedInput(DisfliteError):
    """Turn records were not sorted by timestamp."""


class EmptyInputCorpus(DisfliteError):
    """An operation that samples from a corpus received no sentences."""


# --- tokenizer ---

class VocabTooSmall(DisfliteError):
    """Requested vocab size cannot hold the specials plus corpus alphabet."""


# --- model ---

class ShapeMismatch(DisfliteError):
    """Batch arrays disagree in shape, or exceed model limits."""


class IdOutOfRange(DisfliteError):
    """A token or segment id is outside the embedding table."""


class CorruptFile(DisfliteError):
    """Checkpoint file failed magic/version/shape validation."""


class MissingTensor(DisfliteError):
    """Checkpoint manifest lacks a tensor the config requires."""


# --- training ---

class AllPositionsIgnored(DisfliteError):
    """Loss was requested over a batch with no supervised positions."""


class NonFiniteGradient(DisfliteError):
    """A gradient contained NaN or Inf; the optimizer step was aborted."""


# --- self-training ---

class VocabMismatch(DisfliteError):
    """Teacher checkpoint was trained against a different vocabulary."""


class EmptySilverWithPositivePct(DisfliteError):
    """Batch mixing requested silver examples but the silver corpus is empty."""


class SilverLeak(DisfliteError):
    """Silver-origin sequences appeared where only gold data is allowed."""


# --- metrics ---

class AlignmentMismatch(DisfliteError):
    """Prediction and gold sequences do not align word-for-word."""


# --- quantization ---

class NonFiniteValues(DisfliteError):
    """Tensor handed to the quantizer contains NaN or Inf."""
