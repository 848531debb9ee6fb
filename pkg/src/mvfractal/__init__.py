"""Multichannel multifractal detrended fluctuation analysis and fault diagnosis."""

__version__ = "0.1.0"

from .diagnosis import (  # noqa: E402
    DiagnosisModel,
    DistanceKind,
    HealthDecision,
    Label,
    MarginPolicy,
    calibrate_threshold,
    classify,
    feature_distance,
)
from .features import (  # noqa: E402
    FeatureVector,
    MultifractalFeatures,
    derive_spectrum,
    fit_hurst,
    multifractal_features,
    summarize_features,
)
from .fluctuation import (  # noqa: E402
    CovarianceEstimator,
    CovMode,
    CovScope,
    DetrendConfig,
    FluctuationSurface,
    Variant,
    analyze_fluctuations,
    covariance_for,
    cumulative_profile,
    detrend_all,
    estimate_covariance,
    fluctuation_fm,
    fluctuation_mmfdfa,
    fluctuation_univariate,
    segment_and_detrend,
)
from .mvmd import ModeSet, MvmdConfig, mvmd_decompose, reconstruct_signal, score_modes_hurst, select_k1  # noqa: E402
from .norms import (  # noqa: E402
    NormOrder,
    SpdMatrix,
    lpq_euclid_norm,
    lpq_norm,
    lpqr_norm,
    mahalanobis_lpq_norm,
    spd_factorize,
)
from .signals import (  # noqa: E402
    MultichannelSeries,
    QGrid,
    ScaleGrid,
    gen_cascade,
    gen_fgn,
    gen_tone_mix,
    gen_white_noise,
    validate_series,
)
