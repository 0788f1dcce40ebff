"""Error types shared across the trainer and the serving layer."""


class ServiceError(Exception):
    """Base class for everything this package raises on purpose."""


class SampleFormatError(ServiceError):
    """A training-sample line does not match the expected schema."""


class ModelConfigError(ServiceError):
    """Bad hyperparameters, encoder identifier, or model artifact."""
