"""Streaming human activity recognition on passive smart-home sensor logs."""
from .events import CANONICAL_LABELS, OTHER, EventStream, LabelMap, load_dataset, temporal_split
from .evaluation import PipelineOptions, metrics, run_experiment
from .features import FeatureConfig

__all__ = [
    "CANONICAL_LABELS",
    "OTHER",
    "EventStream",
    "FeatureConfig",
    "LabelMap",
    "PipelineOptions",
    "load_dataset",
    "metrics",
    "run_experiment",
    "temporal_split",
]
__version__ = "0.1.0"
