"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, MissingArtifactError -> 3,
anything else -> 1.
"""


class PrecedentError(Exception):
    """Base class for package errors."""


class CorpusError(PrecedentError):
    """Corpus files are missing, unreadable, or structurally invalid."""


class LabelValidationError(CorpusError):
    """Relevance labels reference documents that do not exist."""


class EmptyQueryError(PrecedentError):
    """A query document produced no tokens to work with."""


class TermExtractionError(PrecedentError):
    """Term scoring or selection received unusable input."""


class EmbeddingError(PrecedentError):
    """Embedding provider failure."""


class EmbeddingTransportError(EmbeddingError):
    """The external embedding process or endpoint could not be reached."""


class EmbeddingLookupError(EmbeddingError):
    """A precomputed-vector file has no record for the requested text."""


class RerankError(PrecedentError):
    """Sentence-level re-ranking could not be performed."""


class AggregationError(PrecedentError):
    """Score fusion received rankings that cannot be combined."""


class EvaluationError(PrecedentError):
    """A run refers to queries with no relevance judgments."""


class GridSearchError(PrecedentError):
    """Parameter grid is empty or every point failed."""


class ConfigError(PrecedentError):
    """Configuration file or environment override is invalid."""


class MissingArtifactError(PrecedentError):
    """A required input artifact does not exist on disk."""
