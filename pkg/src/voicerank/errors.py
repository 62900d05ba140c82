"""Exception hierarchy shared by all voicerank modules."""


class VoicerankError(Exception):
    """Base class for all errors raised by this package."""


# --- audio ingestion / feature extraction ---

class MalformedContainer(VoicerankError):
    """Binary input (RIFF/WAVE audio or a model file) fails to parse."""


class UnsupportedEncoding(VoicerankError):
    """WAV payload uses a codec or layout we do not decode."""


class EmptyAudio(VoicerankError):
    """WAV container holds zero samples."""


class TooShort(VoicerankError):
    """Clip has too few frames to extract usable features."""


class AllFramesRejected(VoicerankError):
    """Energy VAD removed every frame (silence or noise-only input)."""


# --- model training / application ---

class DimensionMismatch(VoicerankError):
    """Operands disagree on feature / component / subspace dimensions."""


class InsufficientData(VoicerankError):
    """Not enough frames or samples to fit the requested model."""


class DegenerateComponent(VoicerankError):
    """A mixture component collapsed and could not be reseeded."""


class RankDeficient(VoicerankError):
    """Training data spans fewer directions than the requested subspace."""


class ZeroVector(VoicerankError):
    """Vector is (numerically) zero where a direction is required."""


class InsufficientSpeakers(VoicerankError):
    """Too few multi-utterance speakers to fit the speaker subspace."""


class NonConvergence(VoicerankError):
    """EM likelihood decreased beyond tolerance; indicates a bug."""


class NotNormalized(VoicerankError):
    """Operation requires a length-normalized i-vector."""


# --- gallery / metadata ---

class ParseError(VoicerankError):
    """Metadata row could not be parsed; message carries the line number."""


class DuplicateUtterance(VoicerankError):
    """The same utterance id appeared twice during ingestion."""


class EmptyGallery(VoicerankError):
    """Ranking requested against a gallery with no speakers."""


# --- evaluation harnesses ---

class MissingUtterance(VoicerankError):
    """A trial references an utterance id that cannot be resolved."""


class UnknownSpeakerLabel(VoicerankError):
    """A labeled clip names a speaker that is not in the gallery."""


class ClipTooShort(VoicerankError):
    """Clip is shorter than the largest requested truncation length."""


# --- service ---

class ModelsNotLoaded(VoicerankError):
    """The service received a request before its models were loaded."""
