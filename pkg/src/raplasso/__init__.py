"""Streaming sparse regression with an online, gradient-adapted l1 penalty."""

from .bench import (BenchConfig, BenchResult, ContractionReport, StationaryResult,
                    Summary, contraction_probe, delta_l1, f_score, kfold_cv_lambda,
                    run_replications, stepwise_cv_lambda)
from .glm import BINOMIAL, GAUSSIAN, Family, ObsBuffer, fit_penalized, get_family
from .lasso_cd import LassoFit, fit, fit_path, lambda_max, soft_threshold
from .rap import (RapRunner, RapState, TraceRecord, dbeta_dlambda, dcost_dlambda,
                  fallback_direction, update_lambda)
from .simgen import RegimeSpec, StreamSample, make_covariance, make_piecewise_stream, sample_regime
from .streaming_stats import WeightedMoments

__version__ = "0.1.0"

__all__ = [
    "WeightedMoments", "LassoFit", "soft_threshold", "lambda_max", "fit", "fit_path",
    "Family", "GAUSSIAN", "BINOMIAL", "get_family", "ObsBuffer", "fit_penalized",
    "RapState", "TraceRecord", "RapRunner", "dbeta_dlambda", "dcost_dlambda",
    "fallback_direction", "update_lambda",
    "RegimeSpec", "StreamSample", "make_covariance", "sample_regime",
    "make_piecewise_stream",
    "BenchConfig", "BenchResult", "StationaryResult", "Summary", "ContractionReport",
    "f_score", "delta_l1", "kfold_cv_lambda", "stepwise_cv_lambda",
    "run_replications", "contraction_probe",
    "__version__",
]
