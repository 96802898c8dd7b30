"""Cough-audio TB screening pipeline.

Library + CLI covering corpus ingestion, MFCC / log-filterbank feature
extraction, four natively implemented classifier families, nested
patient-disjoint cross-validation with patient-level TB index scoring,
and greedy forward feature selection.
"""

from .classifiers import KNNSpec, LRSpec, MLPSpec, SVMSpec, predict_proba, train
from .corpus import CoughSegment, PatientRecord, estimate_snr, parse_annotations, parse_manifest, summarize
from .errors import ConfigError, DataError, DegenerateFrameError, NumericError, TbScreenError
from .evaluation import (
    FoldPlan,
    MetricsReport,
    PatientScore,
    RocCurve,
    eer_threshold,
    evaluate_outer,
    grid_search,
    make_fold_plan,
    roc_and_auc,
    score_patient,
    sensitivity_at_specificity,
)
from .features import FeatureConfig, FeatureTable, FeatureVector, assemble, extract_table
from .selection import SfsTrace, sfs
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CoughSegment",
    "DataError",
    "DegenerateFrameError",
    "FeatureConfig",
    "FeatureTable",
    "FeatureVector",
    "FoldPlan",
    "KNNSpec",
    "LRSpec",
    "MLPSpec",
    "MetricsReport",
    "NumericError",
    "PatientRecord",
    "PatientScore",
    "RocCurve",
    "SVMSpec",
    "SfsTrace",
    "SynthConfig",
    "TbScreenError",
    "assemble",
    "eer_threshold",
    "estimate_snr",
    "evaluate_outer",
    "extract_table",
    "generate_synthetic",
    "grid_search",
    "make_fold_plan",
    "parse_annotations",
    "parse_manifest",
    "predict_proba",
    "roc_and_auc",
    "score_patient",
    "sensitivity_at_specificity",
    "sfs",
    "summarize",
    "train",
]
