"""Exception hierarchy shared across the toolkit."""


class PictopredError(Exception):
    """Base class for all toolkit errors."""


# --- vocabulary ---


class MalformedDumpError(PictopredError):
    """Vocabulary dump could not be parsed."""


class DuplicateIdError(PictopredError):
    """Two vocabulary entries share the same pictogram id."""


class EmptyVocabularyError(PictopredError):
    """Vocabulary dump contained zero usable entries."""


# --- corpus construction ---


class MalformedInputError(PictopredError):
    """Sentence ingestion file is not in the documented format."""


class WrongGroupSizeError(PictopredError):
    """Prompt builder received the wrong number of items."""


class WrongExampleCountError(PictopredError):
    """Vocabulary prompt builder received an out-of-range example count."""


class BackendUnavailableError(PictopredError):
    """Live text-completion backend could not be reached."""


class MissingFixtureError(PictopredError):
    """Replay fixture has no record for the requested prompt."""


class ScorerFailureError(PictopredError):
    """Sentence scorer raised while cleaning."""


class InvalidKError(PictopredError):
    """Cluster count is out of range for the given sentence sets."""


class InvalidProportionsError(PictopredError):
    """Split proportions do not form a valid partition."""


# --- text to pictogram ---


class EncoderFailureError(PictopredError):
    """Text encoder backend raised during encoding."""


class SpanOutOfRangeError(PictopredError):
    """Character span does not cover any subtoken of the sentence."""


# --- embeddings ---


class UnknownSubtokenError(PictopredError):
    """Subtokenizer could not cover the input string."""


class MissingImageError(PictopredError):
    """Pictogram entry has no resolvable image."""


class DimensionMismatchError(PictopredError):
    """Vector dimensions disagree and no projection is configured."""


class BuildFailedError(PictopredError):
    """Too many entries failed while building an embedding matrix."""


# --- training ---


class MissingRowError(PictopredError):
    """Embedding matrix lacks a vector for a token-table id."""


class NoMaskablePositionsError(PictopredError):
    """A sequence offers no positions eligible for masking."""


class DivergenceDetectedError(PictopredError):
    """Training loss became non-finite."""


class CheckpointIOError(PictopredError):
    """Checkpoint could not be written or read back."""


class VersionMismatchError(PictopredError):
    """Checkpoint does not match the supplied vocabulary or token table."""


# --- evaluation / serving ---


class ZeroProbabilityError(PictopredError):
    """A gold token was scored with probability exactly zero."""

    def __init__(self, message, sentence_index=None):
        super().__init__(message)
        self.sentence_index = sentence_index


class UnknownTokenError(PictopredError):
    """A token is not present in the model's token table."""
