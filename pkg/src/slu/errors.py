"""Exception types shared across the toolkit."""


class SluError(Exception):
    """Base class for toolkit-specific failures."""


class CorpusFormatError(SluError):
    """Corpus file failed validation; carries the offending line number."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = "" if line is None else f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class EmbeddingFormatError(SluError):
    """Pretrained embedding text file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = "" if line is None else f"line {line}: "
        super().__init__(prefix + message)


class ConfigError(SluError):
    """Invalid model, template, lexicon, or noise configuration."""


class TrainingDivergedError(SluError):
    """Training loss became non-finite."""


class CheckpointVersionError(SluError):
    """Checkpoint was written by an incompatible format version."""


class CheckpointIntegrityError(SluError):
    """Checkpoint file is corrupted or truncated."""


class GradCheckNumericError(SluError):
    """Loss became non-finite while probing a parameter."""
