"""Numerical laboratory for covert joint source-channel coding over DMCs."""

from .dmc_core import (
    LN2,
    SUM_TOLERANCE,
    AlphabetMismatchError,
    BinaryInputDMC,
    Distribution,
    SourceSpec,
    ValidationError,
    bernoulli_hamming_source,
    bsc_pair_channel,
    bsc_rows,
    channel_from_json,
    chi_squared,
    kl_divergence,
    mixture,
    product_log_prob,
    source_from_json,
    total_variation,
)
from .limits import (
    CovertCapacity,
    RateDistortionCurve,
    RDPoint,
    ScalingRegime,
    classify_admissibility,
    converse_rate_bound,
    covert_capacity,
    distortion_at_rate,
    mutual_information,
    rate_distortion,
    rate_distortion_curve,
    trivial_distortion,
    trivial_reconstruction,
)
from .separation_codec import (
    MODE_FIXED_WEIGHT,
    MODE_IID,
    CodeEnsemble,
    CodeParams,
    ExperimentRecord,
    GuardExceededError,
    build_ensemble,
    channel_encode,
    end_to_end_simulate,
    exact_expected_distortion,
    message_distribution,
    ml_channel_decode,
    sample_channel,
    source_decode,
    source_encode,
)
from .warden import (
    CovertnessReport,
    DetectionResult,
    PinskerGapReport,
    ResolvabilityRow,
    covertness_report,
    detection_bound,
    exact_output_kl,
    lr_test_simulate,
    monte_carlo_kl,
    pinsker_detection_bound,
    pinsker_gap_bound,
    resolvability_scaling_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
