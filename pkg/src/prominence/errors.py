"""Exception hierarchy for the prominence toolkit.

The CLI maps these onto exit codes: data errors (corpus, alignment,
annotation) exit 2, everything else exits 3.
"""


class ProminenceError(Exception):
    """Base class for all toolkit errors."""


class DataError(ProminenceError):
    """Invalid or missing input data (corpus, alignments, annotations)."""


class CorpusError(DataError):
    """Corpus manifest or audio problem, names the offending utterance."""


class AlignmentError(DataError):
    """Word alignment inconsistent with the transcript or frame grid."""


class PartitionError(DataError):
    """Corpus cannot be partitioned as requested."""


class FeatureError(ProminenceError):
    """Acoustic feature extraction failed."""


class AggregationError(DataError):
    """Annotation records cannot be aggregated (length mismatch, empty)."""


class OverlapError(DataError):
    """Two annotators share no utterance."""


class BatchError(DataError):
    """Annotation batch violates the batch contract."""


class SpanError(ProminenceError):
    """Word span outside the feature matrix."""


class ConfigError(ProminenceError):
    """Invalid model or training configuration."""


class BatchingError(ProminenceError):
    """An utterance cannot fit into any training batch."""


class LossError(ProminenceError):
    """Loss inputs out of contract (targets outside [0, 1], shape mismatch)."""


class TrainingError(ProminenceError):
    """Training aborted (non-finite loss), carries step and batch ids."""


class MetricError(ProminenceError):
    """Metric undefined for the given inputs (constant vector, mismatch)."""


class StudyError(ProminenceError):
    """An experiment cannot run on the provided data."""
