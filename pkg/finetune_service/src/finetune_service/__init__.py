"""Fine-tuning and serving for the character-level retrieval encoder."""
from .encoder import (
    CharEncoder,
    DEFAULT_IDENTIFIER,
    load_encoder,
    parse_identifier,
    save_encoder,
)
from .errors import ModelConfigError, SampleFormatError, ServiceError
from .samples import TrainingSample, read_samples
from .server import DEFAULT_MAX_BATCH, create_app
from .training import TrainHyperparams, TrainReport, batch_loss, sample_loss, train

__version__ = "0.1.0"

__all__ = [
    "CharEncoder",
    "DEFAULT_IDENTIFIER",
    "DEFAULT_MAX_BATCH",
    "ModelConfigError",
    "SampleFormatError",
    "ServiceError",
    "TrainHyperparams",
    "TrainReport",
    "TrainingSample",
    "batch_loss",
    "create_app",
    "load_encoder",
    "parse_identifier",
    "read_samples",
    "sample_loss",
    "save_encoder",
    "train",
    "__version__",
]
