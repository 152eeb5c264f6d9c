"""Exception types shared across the package."""


class CharRnnError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(CharRnnError):
    """Operand dimensions are inconsistent with an operation's contract."""


class DistributionError(CharRnnError):
    """A probability vector is malformed (negative mass or wrong total)."""


class CorpusError(CharRnnError):
    """The corpus text cannot support the requested preprocessing."""


class VocabularyError(CharRnnError):
    """A character or index falls outside the vocabulary."""


class ConfigError(CharRnnError):
    """A configuration value is out of range or inconsistent."""


class LabelError(CharRnnError):
    """A target label lies outside the valid class range."""


class OptimizerError(CharRnnError):
    """The optimizer received a non-finite gradient."""


class TrainingError(CharRnnError):
    """A training run aborted (for example on a non-finite loss)."""


class HistoryFormatError(CharRnnError):
    """A training-history CSV file is malformed."""


class CheckpointFormatError(CharRnnError):
    """A checkpoint file is structurally invalid (magic, version, length)."""


class CheckpointIntegrityError(CharRnnError):
    """A checkpoint fails its checksum or internal consistency checks."""
