"""Shape vocabulary: chi-squared hierarchical clustering plus SVM
self-labeling.

Clustering runs on L1-normalized descriptors because the chi-squared
distance expects comparable masses; the SVMs consume the raw count
vectors, whose scale matches the fixed RBF gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..descriptors import chi2_pairwise
from ..errors import (
    AllClustersDiscarded,
    ConfigError,
    DegenerateClustering,
    ParseError,
    TooFewSamples,
    ValidationError,
)
from ..nn import load_model, save_model
from .svm import (
    DEFAULT_C,
    DEFAULT_GAMMA,
    DEFAULT_NU,
    KKT_TOL,
    OcSvmModel,
    SvmModel,
    cross_validate_svm,
    predict_svm,
    train_multiclass_svm,
    train_ocsvm,
)

DEFAULT_K = 30
DEFAULT_SAMPLE = 10000
DEFAULT_DISCARD = 0.005

CLUSTER_SEED_PURPOSE = 201


def l1_normalize_rows(X):
    """Scale every row to unit mass; rows must have positive sums."""
    X = np.asarray(X, dtype=np.float64)
    sums = X.sum(axis=1, keepdims=True)
    if (sums <= 0).any():
        raise ValidationError("descriptor rows must have positive mass")
    return X / sums


def hierarchical_cluster(X, k: int):
    """Agglomerative average-linkage clustering under chi-squared
    distance, cut at k clusters.

    Rows must be L1-normalized. Merges always take the currently
    closest pair; equal distances resolve to the lexicographically
    lowest index pair, so the labeling is a pure function of X. Labels
    are dense 0..k-1 in order of each cluster's lowest member index.
    """
    X = np.asarray(X, dtype=np.float64)
    if k < 2:
        raise ConfigError("need k >= 2 clusters")
    n = X.shape[0]
    if n < k:
        raise TooFewSamples(f"{n} rows cannot form {k} clusters")
    D = chi2_pairwise(X)
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    members = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)
    cols = np.arange(n)
    for _ in range(n - k):
        i, j = divmod(int(np.argmin(D)), n)
        if i > j:
            i, j = j, i
        si, sj = sizes[i], sizes[j]
        mask = active.copy()
        mask[i] = mask[j] = False
        merged = (si * D[i, mask] + sj * D[j, mask]) / (si + sj)
        D[i, mask] = merged
        D[mask, i] = merged
        D[j, :] = np.inf
        D[:, j] = np.inf
        active[j] = False
        sizes[i] += sizes[j]
        members[i].extend(members[j])
    labels = np.empty(n, dtype=np.int64)
    for lab, cid in enumerate(cols[active]):
        labels[members[cid]] = lab
    return labels


def _chi2_medoid(rows):
    """The member row minimizing total chi-squared distance to the rest."""
    if rows.shape[0] == 1:
        return rows[0].copy()
    totals = chi2_pairwise(rows).sum(axis=1)
    return rows[int(np.argmin(totals))].copy()


@dataclass
class ClusterModel:
    """A cut clustering: requested k, surviving cluster ids, and one
    normalized medoid descriptor per surviving cluster."""

    k_requested: int
    kept_cluster_ids: np.ndarray
    medoids: np.ndarray
    discard_threshold: float
    tv_distance: float | None = None
    sample_indices: np.ndarray | None = None

    @property
    def n_clusters(self):
        return self.kept_cluster_ids.shape[0]


def subsample_and_label(X, m: int = DEFAULT_SAMPLE, k: int = DEFAULT_K,
                        seed: int = 0, C: float = DEFAULT_C,
                        gamma: float = DEFAULT_GAMMA, tol: float = KKT_TOL,
                        cv_folds: int = 0):
    """Label every descriptor via clustering of a sample plus SVM spread.

    A random m-row sample (the whole set when smaller) is clustered
    hierarchically; a multi-class SVM trained on the labeled sample
    assigns every remaining row. Single-member clusters are dissolved
    into their nearest neighbor first, since a one-member class cannot
    train its one-vs-rest machine. Returns (labels for all rows,
    ClusterModel over the surviving clusters, SvmModel). The
    ClusterModel's tv_distance records how far the full labeling's
    distribution drifted from the sample's. With cv_folds >= 2, stratified
    cross-validation accuracy at the fixed hyperparameters is recorded
    on the SvmModel.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"descriptor matrix must be 2-D, "
                              f"got {X.shape}")
    n = X.shape[0]
    if n < k:
        raise TooFewSamples(f"{n} rows cannot form {k} clusters")
    rng = np.random.default_rng(
        np.random.SeedSequence((seed, CLUSTER_SEED_PURPOSE)))
    m_eff = min(m, n)
    sample_idx = np.sort(rng.choice(n, size=m_eff, replace=False))
    sample = X[sample_idx]
    sample_norm = l1_normalize_rows(sample)
    sample_labels = hierarchical_cluster(sample_norm, k)
    counts = np.bincount(sample_labels, minlength=k)
    if counts.min() == 0:
        raise DegenerateClustering("clustering produced an empty cluster")
    # a cluster with a single member cannot train its one-vs-rest SVM;
    # dissolve such clusters into the nearest surviving one, the same
    # reassignment rule the discard step applies to orphans
    tiny = np.flatnonzero(counts < 2)
    if tiny.size:
        survivors = np.flatnonzero(counts >= 2)
        if survivors.size < 2:
            raise DegenerateClustering(
                f"only {survivors.size} clusters have the 2+ members "
                "self-labeling needs")
        surv_medoids = np.stack(
            [_chi2_medoid(sample_norm[sample_labels == c])
             for c in survivors])
        lone = np.isin(sample_labels, tiny)
        d = chi2_pairwise(sample_norm[lone], surv_medoids)
        sample_labels[lone] = survivors[np.argmin(d, axis=1)]
        counts = np.bincount(sample_labels, minlength=k)
    svm = train_multiclass_svm(sample, sample_labels, C, gamma, tol)
    if cv_folds >= 2:
        accs = cross_validate_svm(sample, sample_labels, C, gamma,
                                  folds=cv_folds, seed=seed)
        svm.cv_accuracy = float(np.mean(accs))
    labels = np.empty(n, dtype=np.int64)
    labels[sample_idx] = sample_labels
    rest = np.setdiff1d(np.arange(n), sample_idx, assume_unique=True)
    if rest.size:
        labels[rest] = predict_svm(svm, X[rest])[0]
    p_sample = counts / m_eff
    p_all = np.bincount(labels, minlength=k) / n
    tv = 0.5 * float(np.abs(p_sample - p_all).sum())
    present = np.flatnonzero(counts > 0).astype(np.int64)
    medoids = np.stack([_chi2_medoid(sample_norm[sample_labels == c])
                        for c in present])
    model = ClusterModel(k_requested=k,
                         kept_cluster_ids=present,
                         medoids=medoids, discard_threshold=0.0,
                         tv_distance=tv, sample_indices=sample_idx)
    return labels, model, svm


def discard_small_clusters(X, labels, threshold: float):
    """Drop clusters holding less than a relative share of the samples.

    Members of dropped clusters move to the nearest surviving medoid by
    chi-squared distance. Returns (dense remapped labels, kept original
    ids, kept medoids). Total sample count is preserved.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if n == 0:
        raise ValidationError("no labels to filter")
    if threshold < 0 or threshold >= 1:
        raise ConfigError("threshold must be in [0, 1)")
    Xn = l1_normalize_rows(X)
    if Xn.shape[0] != n:
        raise ValidationError("descriptor count does not match label count")
    counts = np.bincount(labels)
    kept = np.nonzero((counts > 0) & (counts / n >= threshold))[0]
    if kept.size == 0:
        raise AllClustersDiscarded(f"no cluster reaches share {threshold}")
    medoids = np.stack([_chi2_medoid(Xn[labels == c]) for c in kept])
    remap = np.full(counts.shape[0], -1, dtype=np.int64)
    remap[kept] = np.arange(kept.size)
    out = remap[labels]
    orphan = out < 0
    if orphan.any():
        d = chi2_pairwise(Xn[orphan], medoids)
        out[orphan] = np.argmin(d, axis=1)
    return out, kept, medoids


@dataclass
class ShapeModel:
    """The full shape vocabulary: clustering, labeler and novelty."""

    cluster: ClusterModel
    svm: SvmModel
    ocsvm: OcSvmModel

    @property
    def n_clusters(self):
        return self.cluster.n_clusters


def build_shape_model(X, m: int = DEFAULT_SAMPLE, k: int = DEFAULT_K,
                      threshold: float = DEFAULT_DISCARD, seed: int = 0,
                      C: float = DEFAULT_C, gamma: float = DEFAULT_GAMMA,
                      nu: float = DEFAULT_NU, cv_folds: int = 0):
    """Cluster, self-label, discard tiny clusters and fit the novelty
    machine on the same sample. Returns (dense labels for X, ShapeModel).
    """
    labels_all, pre, svm = subsample_and_label(X, m=m, k=k, seed=seed, C=C,
                                               gamma=gamma,
                                               cv_folds=cv_folds)
    final, kept, medoids = discard_small_clusters(X, labels_all, threshold)
    cluster = ClusterModel(k_requested=k, kept_cluster_ids=kept,
                           medoids=medoids, discard_threshold=threshold,
                           tv_distance=pre.tv_distance,
                           sample_indices=pre.sample_indices)
    X = np.asarray(X, dtype=np.float64)
    ocsvm = train_ocsvm(X[pre.sample_indices], nu=nu, gamma=gamma)
    return final, ShapeModel(cluster=cluster, svm=svm, ocsvm=ocsvm)


def assign_clusters(model: ShapeModel, X):
    """Dense cluster labels in [0, n_clusters) for new descriptors.

    The SVM proposes one of the original k labels; proposals landing in
    a discarded cluster fall back to the nearest kept medoid by
    chi-squared distance.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"descriptor matrix must be 2-D, "
                              f"got {X.shape}")
    pred, _ = predict_svm(model.svm, X)
    kept = model.cluster.kept_cluster_ids
    remap = np.full(model.cluster.k_requested, -1, dtype=np.int64)
    remap[kept] = np.arange(kept.shape[0])
    out = remap[pred]
    orphan = out < 0
    if orphan.any():
        d = chi2_pairwise(l1_normalize_rows(X[orphan]),
                          model.cluster.medoids)
        out[orphan] = np.argmin(d, axis=1)
    return out


def save_shape_model(model: ShapeModel, path) -> None:
    """Write the bundled cluster/SVM/novelty model to one container."""
    meta = {
        "k_requested": int(model.cluster.k_requested),
        "kept_cluster_ids": [int(c) for c in model.cluster.kept_cluster_ids],
        "discard_threshold": float(model.cluster.discard_threshold),
        "tv_distance": model.cluster.tv_distance,
        "svm": {
            "C": model.svm.C,
            "gamma": model.svm.gamma,
            "classes": [int(c) for c in model.svm.classes],
            "cv_accuracy": model.svm.cv_accuracy,
        },
        "ocsvm": {
            "nu": model.ocsvm.nu,
            "gamma": model.ocsvm.gamma,
            "rho": model.ocsvm.rho,
            "scale": model.ocsvm.scale,
            "train_fraction_inside": model.ocsvm.train_fraction_inside,
        },
    }
    arrays = {
        "medoids": model.cluster.medoids,
        "svm_sv": model.svm.sv_x,
        "svm_coef": model.svm.coef,
        "svm_b": model.svm.b,
        "oc_sv": model.ocsvm.sv_x,
        "oc_alpha": model.ocsvm.alpha,
    }
    save_model(path, "shapemodel", meta, arrays)


def load_shape_model(path) -> ShapeModel:
    """Read a bundled shape model back; arrays come back as float64."""
    kind, meta, arrays = load_model(path)
    if kind != "shapemodel":
        raise ParseError(f"expected a shape model file, found {kind!r}")
    try:
        cluster = ClusterModel(
            k_requested=meta["k_requested"],
            kept_cluster_ids=np.asarray(meta["kept_cluster_ids"],
                                        dtype=np.int64),
            medoids=np.asarray(arrays["medoids"], dtype=np.float64),
            discard_threshold=meta["discard_threshold"],
            tv_distance=meta.get("tv_distance"))
        svm = SvmModel(
            C=meta["svm"]["C"], gamma=meta["svm"]["gamma"],
            classes=np.asarray(meta["svm"]["classes"], dtype=np.int64),
            sv_x=np.asarray(arrays["svm_sv"], dtype=np.float64),
            coef=np.asarray(arrays["svm_coef"], dtype=np.float64),
            b=np.asarray(arrays["svm_b"], dtype=np.float64),
            cv_accuracy=meta["svm"].get("cv_accuracy"))
        ocsvm = OcSvmModel(
            nu=meta["ocsvm"]["nu"], gamma=meta["ocsvm"]["gamma"],
            sv_x=np.asarray(arrays["oc_sv"], dtype=np.float64),
            alpha=np.asarray(arrays["oc_alpha"], dtype=np.float64),
            rho=meta["ocsvm"]["rho"], scale=meta["ocsvm"]["scale"],
            train_fraction_inside=meta["ocsvm"].get(
                "train_fraction_inside", 0.0))
    except KeyError as exc:
        raise ParseError(f"shape model file missing field: {exc}") from exc
    return ShapeModel(cluster=cluster, svm=svm, ocsvm=ocsvm)
