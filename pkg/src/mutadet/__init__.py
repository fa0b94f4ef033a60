"""Uncertainty-aware mutation analysis for object-detection software.

The package takes multi-run detection records produced by a model under
test and by its mutants (dropout / dropblock injected at inference time),
partitions detections into match / miss / ghost sets against the original
model's output, scores each mutant on detection-level and uncertainty-level
deviation, and runs the statistical machinery (rank tests, correlation)
used to compare mutant populations and test suites.
"""

from mutadet.types import (
    AnalysisConfig,
    BBox,
    Detection,
    GroundTruth,
    MutationConfig,
    RunOutput,
    ValidationError,
    iou,
)

__all__ = [
    "AnalysisConfig",
    "BBox",
    "Detection",
    "GroundTruth",
    "MutationConfig",
    "RunOutput",
    "ValidationError",
    "iou",
]

__version__ = "0.1.0"
