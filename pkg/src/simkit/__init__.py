"""simkit: multimodal similarity-kernel machine learning toolkit.

Builds Fisher-kernel style similarity features from per-modality distances
to a reference sample set, with the supporting stack: diagonal-covariance
GMMs trained by EM, Fisher vectors/kernels, a dual-ascent soft-margin SVM,
logistic regression, information-theoretic co-clustering, time-series and
text distances, session synthesis, evaluation metrics and an experiment CLI.
"""

from .bicluster import Coclustering, cluster_distance_features, cocluster
from .distances import (
    CorpusStats,
    SparseTermVector,
    asym_set_distance,
    dtw,
    dtw_batch,
    fisher_distance_discrete,
    fisher_distance_gaussian1d,
    js_divergence,
    kl_divergence,
    minkowski,
    weight_terms,
)
from .fisher import (
    FisherVector,
    LatticeSampleSet,
    fisher_kernel,
    fisher_score,
    fisher_vector,
    spatial_clique_scores,
)
from .gmm import GaussianMixture, em_fit, log_pdf, loglik_gradient, memberships
from .learners import (
    LogRegModel,
    SvmModel,
    logreg_decision,
    logreg_train,
    svm_decision,
    svm_train,
)
from .metrics import average_precision, confusion_metrics, ndcg, roc_auc
from .sessions import SessionRecord, describe_session, generate_sessions, session_distance_columns
from .simkernel import (
    DistanceSpec,
    SampleSet,
    SimilarityFeatures,
    StandardizationStats,
    energy_class,
    energy_multiagent,
    energy_pairwise,
    fit_standardization,
    gibbs_logdensity,
    similarity_features,
    similarity_kernel_matrix,
    standardize_columns,
    uniform_representation,
)
from .experiment import eval_report, run_experiment, search_modality_weights, select_reference_set

__version__ = "0.1.0"

__all__ = [
    "Coclustering",
    "CorpusStats",
    "DistanceSpec",
    "FisherVector",
    "GaussianMixture",
    "LatticeSampleSet",
    "LogRegModel",
    "SampleSet",
    "SessionRecord",
    "SimilarityFeatures",
    "SparseTermVector",
    "StandardizationStats",
    "SvmModel",
    "asym_set_distance",
    "average_precision",
    "cluster_distance_features",
    "cocluster",
    "confusion_metrics",
    "describe_session",
    "dtw",
    "dtw_batch",
    "em_fit",
    "energy_class",
    "energy_multiagent",
    "energy_pairwise",
    "eval_report",
    "fisher_distance_discrete",
    "fisher_distance_gaussian1d",
    "fisher_kernel",
    "fisher_score",
    "fisher_vector",
    "fit_standardization",
    "generate_sessions",
    "gibbs_logdensity",
    "js_divergence",
    "kl_divergence",
    "log_pdf",
    "loglik_gradient",
    "logreg_decision",
    "logreg_train",
    "memberships",
    "minkowski",
    "ndcg",
    "roc_auc",
    "run_experiment",
    "search_modality_weights",
    "select_reference_set",
    "session_distance_columns",
    "similarity_features",
    "similarity_kernel_matrix",
    "spatial_clique_scores",
    "standardize_columns",
    "svm_decision",
    "svm_train",
    "uniform_representation",
    "weight_terms",
]
