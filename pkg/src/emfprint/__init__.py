"""Device fingerprinting from unintentional-emission spectral traces."""

from .evaluation import (
    EvaluationReport,
    ScoreMatrix,
    best_common_threshold,
    cross_validate,
    kfold_split,
    measure_decision_latency,
    per_class_threshold,
    per_class_thresholds,
    tpr_fpr,
)
from .features import (
    FeatureVector,
    FiveStats,
    RegionLayout,
    build_region_grid,
    compute_statistics,
    default_layout,
    extract_features,
    features_from_trace,
    normalize,
)
from .ocsvm import OneClassModel, Verdict, decide, rbf_kernel, score, train
from .ranking import RankedFeatures, discretize, evaluate_top_k, mutual_information, rank_features
from .registry import DeviceProfile, list_profiles, load_all, store_profile
from .synth import CorpusSpec, DeviceArchetype, generate_corpus, make_archetype, synthesize_trace
from .trace import (
    FSW8,
    HACKRF_ONE,
    InstrumentFormat,
    SpectralSample,
    SpectralTrace,
    detect_boot_onset,
    parse_trace,
    serialize_trace,
    window_trace,
)

__version__ = "0.1.0"
