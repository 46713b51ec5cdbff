"""Information-matrix estimation for black-box generative models.

Pipeline: sample the model at a reference parameter and at randomly
perturbed parameters, estimate the divergence of each pair directly from
the pooled-EMST cross-match statistic (no density estimation), then invert
the quadratic-form relation between small-perturbation divergence and the
Fisher information matrix by least squares, optionally under a PSD
constraint. Bounds on estimator covariance follow by regularized inversion.
"""

from .crlb import (
    CrlbMatrix,
    WeightMatrix,
    invert_to_crlb,
    regularize_fim,
    weighted_volume,
)
from .divergence import (
    DensityPair1D,
    DivergenceEstimate,
    a_alpha_quadrature,
    divergence_quadrature,
    divergence_quadrature_f_form,
    estimate_divergence,
    f_weight,
)
from .emst import (
    LabeledSampleSet,
    PointCloud,
    SpanningTree,
    build_emst,
    count_cross_edges,
    fr_statistic,
)
from .experiments import (
    ExperimentConfig,
    MseRecord,
    run_gaussian_gap_vs_n,
    run_gaussian_mse_vs_dim,
)
from .fim import (
    FimEstimate,
    PerturbationDesign,
    QVector,
    diagonal_fim,
    estimate_q,
    ls_fim,
    mat_fim,
    psd_constrained_fim,
    sample_perturbations,
    synthetic_q,
    vec_fim,
)
from .models import ExternalModel, GaussianMeanModel, GenerativeModel, sample_fim_oracle
from .rng import RNG_SCHEME, CounterRng, derive_seed

__version__ = "0.1.0"

__all__ = [
    "CounterRng",
    "CrlbMatrix",
    "DensityPair1D",
    "DivergenceEstimate",
    "ExperimentConfig",
    "ExternalModel",
    "FimEstimate",
    "GaussianMeanModel",
    "GenerativeModel",
    "LabeledSampleSet",
    "MseRecord",
    "PerturbationDesign",
    "PointCloud",
    "QVector",
    "RNG_SCHEME",
    "SpanningTree",
    "WeightMatrix",
    "a_alpha_quadrature",
    "build_emst",
    "count_cross_edges",
    "derive_seed",
    "diagonal_fim",
    "divergence_quadrature",
    "divergence_quadrature_f_form",
    "estimate_divergence",
    "estimate_q",
    "f_weight",
    "fr_statistic",
    "invert_to_crlb",
    "ls_fim",
    "mat_fim",
    "psd_constrained_fim",
    "regularize_fim",
    "run_gaussian_gap_vs_n",
    "run_gaussian_mse_vs_dim",
    "sample_fim_oracle",
    "sample_perturbations",
    "synthetic_q",
    "vec_fim",
    "weighted_volume",
]
