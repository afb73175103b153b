"""Word-level speech prominence estimation from crowdsourced emphasis
annotations: corpus handling, acoustic features, annotation aggregation and
quality control, neural and wavelet estimators, training, evaluation,
experiment studies, and an annotation-collection service."""

from .annotations import (
    AnnotationRecord,
    ProminenceTarget,
    aggregate_prominence,
    cohen_kappa,
    fit_rasch,
    passes_bot_filter,
)
from .corpus import (
    Partition,
    Utterance,
    WordSpan,
    load_corpus,
    partition_corpus,
    seconds_to_frames,
)
from .estimator import NeuralProminenceEstimator, WaveletProminenceEstimator
from .evaluation import EvalReport, bce_metric, evaluate, pearson
from .features import DEFAULT_MEL, MelConfig, melspectrogram
from .model import (
    ModelConfig,
    ProminenceNet,
    downsample,
    load_checkpoint,
    save_checkpoint,
    upsample_targets,
)
from .prepare import PreparedUtterance, prepare_corpus, prepare_utterance
from .training import TrainConfig, make_batches, train

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "DEFAULT_MEL",
    "EvalReport",
    "MelConfig",
    "ModelConfig",
    "NeuralProminenceEstimator",
    "Partition",
    "PreparedUtterance",
    "ProminenceNet",
    "ProminenceTarget",
    "TrainConfig",
    "Utterance",
    "WaveletProminenceEstimator",
    "WordSpan",
    "aggregate_prominence",
    "bce_metric",
    "cohen_kappa",
    "downsample",
    "evaluate",
    "fit_rasch",
    "load_checkpoint",
    "load_corpus",
    "make_batches",
    "melspectrogram",
    "partition_corpus",
    "passes_bot_filter",
    "pearson",
    "prepare_corpus",
    "prepare_utterance",
    "save_checkpoint",
    "seconds_to_frames",
    "train",
    "upsample_targets",
    "__version__",
]
