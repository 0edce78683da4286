"""Exception hierarchy for the sentiment engine.

Everything raised on purpose by the engine derives from ``SentimentError``;
management commands turn it into ``CommandError``.
"""


class SentimentError(Exception):
    """Base class for all engine errors."""


class ShapeError(SentimentError, ValueError):
    """Operand shapes do not fit the operation."""


class ConfigError(SentimentError, ValueError):
    """Invalid configuration or hyperparameter value."""


class TextEncodingError(SentimentError, UnicodeError):
    """Input text is not valid UTF-8."""


class EmptyDocumentError(SentimentError, ValueError):
    """A document has no tokens left after cleaning."""


class VocabularyError(SentimentError, ValueError):
    pass


class EmbeddingParseError(SentimentError, ValueError):
    """A pretrained vector file line could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class EmbeddingDimensionError(SentimentError, ValueError):
    """Vector file dimension disagrees with the configured dimension."""


class DivergenceError(SentimentError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch, loss):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f'non-finite loss {loss!r} at epoch {epoch}, batch {batch}')


class SplitError(SentimentError, ValueError):
    """A fold or subsample split cannot be constructed."""


class CorpusError(SentimentError, ValueError):
    """A corpus file is malformed."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        prefix = ''
        if path is not None:
            prefix = f'{path}: '
        if line is not None:
            prefix = f'{prefix}line {line}: '
        super().__init__(f'{prefix}{message}')


class MetricError(SentimentError, ValueError):
    pass


class CheckpointError(SentimentError, ValueError):
    pass
