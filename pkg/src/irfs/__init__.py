"""Repeat factor sampling for long-tailed detection datasets.

Category factors come from image frequencies (RFS), a mean of image and
instance frequencies (IRFS), or instance frequencies alone; images take the
largest factor of the categories they contain and are repeated accordingly.
"""

from ._version import __version__
from .annotations import Dataset, dataset_summary, load_dataset
from .errors import (
    DanglingReference,
    DatasetError,
    DuplicateId,
    EmptyDataset,
    InfeasibleSpec,
    IrfsError,
    MalformedJson,
    ProvenanceMismatch,
    SchemaViolation,
)
from .estimator import RepeatFactorSampler, check_dataset
from .frequency import FrequencyBucket, bucket_of, compute_frequencies
from .repeat_factor import (
    MeanKind,
    Method,
    SamplerConfig,
    category_repeat_factor,
    compute_repeat_factors,
    effective_frequency,
    image_repeat_factors,
)
from .report import build_report, diff_methods
from .sampler import EpochSample, expected_exposure, sample_epoch

__all__ = [
    "__version__",
    "Dataset",
    "load_dataset",
    "dataset_summary",
    "compute_frequencies",
    "bucket_of",
    "FrequencyBucket",
    "MeanKind",
    "Method",
    "SamplerConfig",
    "effective_frequency",
    "category_repeat_factor",
    "compute_repeat_factors",
    "image_repeat_factors",
    "EpochSample",
    "sample_epoch",
    "expected_exposure",
    "build_report",
    "diff_methods",
    "RepeatFactorSampler",
    "check_dataset",
    "IrfsError",
    "DatasetError",
    "MalformedJson",
    "SchemaViolation",
    "DuplicateId",
    "DanglingReference",
    "EmptyDataset",
    "ProvenanceMismatch",
    "InfeasibleSpec",
]
