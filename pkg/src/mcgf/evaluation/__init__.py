"""Metrics, the evaluation pipeline, ablations, the baseline and the tuner."""

from mcgf.evaluation.baseline import gfcf_mc_scores, run_gfcf_mc_baseline
from mcgf.evaluation.metrics import GroundTruth, ndcg_at_k, positives, recall_at_k
from mcgf.evaluation.protocol import (
    PRESETS, VARIANTS, EvalReport, ModelConfig, fit, run_ca_gf, run_variant,
)
from mcgf.evaluation.tuning import TuneResult, TuneSpec, tune

__all__ = [
    "PRESETS", "VARIANTS", "EvalReport", "GroundTruth", "ModelConfig", "TuneResult", "TuneSpec",
    "fit", "gfcf_mc_scores", "ndcg_at_k", "positives", "recall_at_k", "run_ca_gf",
    "run_gfcf_mc_baseline", "run_variant", "tune",
]
