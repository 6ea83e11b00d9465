"""Dithered quantized sub-Gaussian random embeddings: mapping, distances,
set geometry, and the Monte Carlo verification harness."""

from .ensembles import (
    Ensemble,
    InvalidArgument,
    SensingMatrix,
    berry_esseen_gap,
    binomial_mad,
    make_ensemble,
    mu_sg,
    mu_sg_exact_binomial,
    psi2_norm,
    sample_matrix,
)
from .quantizer import (
    Dither,
    QuantizedCode,
    QuantizedMap,
    QuantizerConfig,
    apply,
    dithered_floor_exact,
    dithered_floor_mean,
    make_map,
    quantize,
)
from .distances import (
    PreconditionFailed,
    SoftDistanceReport,
    ThresholdCount,
    hyperplane_count,
    lemma1_check,
    lemma3_check,
    pseudo_distance,
    soft_count_1d,
    soft_pseudo_distance,
)
from .geometry import (
    AntiSparsityReport,
    EuclideanBall,
    FiniteSet,
    LowRankBall,
    SparseBall,
    WidthEstimate,
    anti_sparsity,
    empirical_net,
    entropy_bound,
    minimal_m,
    rotate_antisparsify,
    sample_point,
    sup_oracle,
    width_estimate,
)
from .experiments import (
    BinomialMadReport,
    ExperimentResult,
    TrialPlan,
    bernoulli_floor_distortion,
    consistency_width_sweep,
    fit_loglog_slope,
    lemma4_diameter_check,
    lemma5_chernoff_check,
    linear_baseline,
    no_dither_counterexample,
    quasi_isometry_sweep,
    section2_bernoulli_floor,
    stirling_gosper_check,
)

__version__ = "0.1.0"
