"""Commit-level energy regression detection for project test suites."""

from .config import AnalysisConfig, PipelineConfig, load_analysis_config, load_pipeline_config
from .detection import classify_change, cusum, detect_all, detect_change_points, match_context_tags
from .model import ChangeEvent, CommitDistribution, CommitRef, MeasurementSample, StabilityReport
from .stability import modified_z_scores, verify_stability

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "ChangeEvent", "CommitDistribution", "CommitRef", "MeasurementSample",
    "PipelineConfig", "StabilityReport", "classify_change", "cusum", "detect_all",
    "detect_change_points", "load_analysis_config", "load_pipeline_config", "match_context_tags",
    "modified_z_scores", "verify_stability",
]
