"""Shape vocabulary building: clustering, self-labeling and novelty.

Hierarchical clustering over chi-squared distances discretizes Shape
Context descriptors into a small vocabulary; a multi-class SVM extends
the sample labeling to every descriptor; a one-class SVM flags
descriptors far from the training distribution.
"""

from .cluster import (
    ClusterModel,
    ShapeModel,
    assign_clusters,
    build_shape_model,
    discard_small_clusters,
    hierarchical_cluster,
    l1_normalize_rows,
    load_shape_model,
    save_shape_model,
    subsample_and_label,
)
from .svm import (
    OcSvmModel,
    SvmModel,
    cross_validate_svm,
    novelty_proximity,
    ocsvm_decision,
    predict_svm,
    rbf_kernel,
    train_multiclass_svm,
    train_ocsvm,
)

__all__ = [
    "ClusterModel",
    "OcSvmModel",
    "ShapeModel",
    "SvmModel",
    "assign_clusters",
    "build_shape_model",
    "cross_validate_svm",
    "discard_small_clusters",
    "hierarchical_cluster",
    "l1_normalize_rows",
    "load_shape_model",
    "novelty_proximity",
    "ocsvm_decision",
    "predict_svm",
    "rbf_kernel",
    "save_shape_model",
    "subsample_and_label",
    "train_multiclass_svm",
    "train_ocsvm",
]
