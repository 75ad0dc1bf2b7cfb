"""Exception hierarchy shared by every stage of the pipeline."""


class FluencyError(Exception):
    """Base class for all pipeline errors."""


class DecodeError(FluencyError):
    pass


class UnsupportedFormat(FluencyError):
    pass


class ConfigError(FluencyError, ValueError):
    pass


class ManifestError(FluencyError):
    pass


class DatasetError(FluencyError):
    pass


class ExtractionError(FluencyError):
    pass


class TrainError(FluencyError):
    pass


class PredictError(FluencyError):
    pass


class EvalError(FluencyError):
    pass


class CorpusError(FluencyError):
    pass


class ModelFormatError(FluencyError):
    pass


class ConvergenceWarning(UserWarning):
    """Training finished but the loss never went down."""
