"""Heartbeat classifier fusion: MLP, RBF network and polynomial SVM combined
by majority voting or by a mutual-information weighted sum."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    BeatClass, Dataset, FeatureVector, FiducialAnnotation, SplitSpec, TRAINABLE_CLASSES,
    extract_features, parse_feature_csv, split, synth_generate, table1_counts, write_feature_csv,
)
from .ensemble import FusionModel, fit_fusion, majority_vote, predict_weighted, weighted_sum  # noqa: E402
from .metrics import (  # noqa: E402
    ClassMetrics, ConfusionCounts, class_metrics, confusion, entropy_truth_marginal, joint_entropy,
    mutual_information, normalized_mi,
)
from .mlp import LmConfig, MlpModel, mlp_forward, mlp_init, mlp_train_lm  # noqa: E402
from .rbf import RbfModel, rbf_build, rbf_forward, rbf_hidden  # noqa: E402
from .svm import PolyKernel, SmoConfig, kernel_eval, svm_scores, svm_train_binary, svm_train_ova  # noqa: E402
