"""Support vector machines solved from scratch by pairwise coordinate
optimization.

The multi-class machine is one-vs-rest over binary soft-margin
problems; the one-class machine is the nu-formulation with a shared
simplex constraint. Both use the RBF kernel and terminate when every
optimality violation is inside the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ClassUnderflow, ConfigError

DEFAULT_C = 1e5
DEFAULT_GAMMA = 1e-3
DEFAULT_NU = 0.1
KKT_TOL = 1e-3


def rbf_kernel(A, B, gamma: float):
    """exp(-gamma * squared euclidean distance) for all row pairs."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    aa = np.einsum("ij,ij->i", A, A)[:, None]
    bb = np.einsum("ij,ij->i", B, B)[None, :]
    d2 = np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


def _smo_binary(K, y, C, tol, max_passes: int = 10000):
    """Solve one binary soft-margin dual on a precomputed kernel.

    Returns (alpha, b). Terminates when a pass over every point finds
    no optimality violation larger than tol.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    b = 0.0
    # decision values f_i = sum_j alpha_j y_j K_ij + b, kept incremental
    f = np.full(n, b)

    def try_pair(i, j):
        nonlocal b, f
        if i == j:
            return False
        ei = f[i] - y[i]
        ej = f[j] - y[j]
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(C, C + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - C)
            hi = min(C, alpha[i] + alpha[j])
        if lo >= hi:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            return False
        aj = alpha[j] + y[j] * (ei - ej) / eta
        aj = min(hi, max(lo, aj))
        dj = aj - alpha[j]
        if abs(dj) < 1e-12 * (aj + alpha[j] + 1e-12):
            return False
        ai = alpha[i] - y[i] * y[j] * dj
        di = ai - alpha[i]
        b1 = b - ei - y[i] * di * K[i, i] - y[j] * dj * K[i, j]
        b2 = b - ej - y[i] * di * K[i, j] - y[j] * dj * K[j, j]
        if 0.0 < ai < C:
            nb = b1
        elif 0.0 < aj < C:
            nb = b2
        else:
            nb = 0.5 * (b1 + b2)
        f += y[i] * di * K[i] + y[j] * dj * K[j] + (nb - b)
        alpha[i] = ai
        alpha[j] = aj
        b = nb
        return True

    def examine(i):
        ri = (f[i] - y[i]) * y[i]
        if not ((ri < -tol and alpha[i] < C) or (ri > tol and alpha[i] > 0)):
            return False
        free = np.nonzero((alpha > 0) & (alpha < C))[0]
        if free.size > 1:
            errs = f[free] - y[free]
            j = int(free[np.argmax(np.abs(errs - (f[i] - y[i])))])
            if try_pair(i, j):
                return True
        for j in np.roll(np.arange(n), -i - 1):
            if try_pair(i, int(j)):
                return True
        return False

    examine_all = True
    for _ in range(max_passes):
        changed = 0
        if examine_all:
            targets = range(n)
        else:
            targets = np.nonzero((alpha > 0) & (alpha < C))[0]
        for i in targets:
            changed += examine(int(i))
        if examine_all:
            if changed == 0:
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    return alpha, b


@dataclass
class SvmModel:
    """One-vs-rest RBF classifier: per-class dual coefficients over a
    shared support vector set."""

    C: float
    gamma: float
    classes: np.ndarray
    sv_x: np.ndarray
    coef: np.ndarray
    b: np.ndarray
    cv_accuracy: float | None = None

    @property
    def n_classes(self):
        return self.classes.shape[0]


def train_multiclass_svm(X, y, C: float = DEFAULT_C,
                         gamma: float = DEFAULT_GAMMA,
                         tol: float = KKT_TOL) -> SvmModel:
    """Train one-vs-rest binary machines on a shared kernel matrix."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ConfigError(f"X must be (n, d) with matching labels, "
                          f"got {X.shape} and {y.shape}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.shape[0] < 2:
        raise ClassUnderflow("need at least 2 classes")
    if counts.min() < 2:
        small = classes[counts < 2]
        raise ClassUnderflow(f"classes {small.tolist()} have fewer than 2 "
                             f"samples")
    K = rbf_kernel(X, X, gamma)
    n = X.shape[0]
    alphas = np.zeros((classes.shape[0], n))
    bs = np.zeros(classes.shape[0])
    for ci, c in enumerate(classes):
        t = np.where(y == c, 1.0, -1.0)
        a, b = _smo_binary(K, t, C, tol)
        alphas[ci] = a * t
        bs[ci] = b
    sv = np.nonzero(np.any(np.abs(alphas) > 1e-12, axis=0))[0]
    return SvmModel(C=C, gamma=gamma, classes=classes,
                    sv_x=X[sv].copy(), coef=alphas[:, sv].copy(), b=bs)


def predict_svm(model: SvmModel, X):
    """(labels, per-class decision values) for descriptor rows."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None]
    Kx = rbf_kernel(model.sv_x, X, model.gamma)
    scores = (model.coef @ Kx).T + model.b[None, :]
    labels = model.classes[np.argmax(scores, axis=1)]
    if single:
        return labels[0], scores[0]
    return labels, scores


def cross_validate_svm(X, y, C: float = DEFAULT_C,
                       gamma: float = DEFAULT_GAMMA, folds: int = 5,
                       seed: int = 0):
    """Stratified randomized k-fold accuracy for fixed hyperparameters.

    Each fold holds out roughly 1/folds of every class (about 20% at the
    default) and scores the machine trained on the rest. Returns the
    per-fold accuracies.
    """
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.shape[0] < 2 or counts.min() < 3:
        raise ClassUnderflow("every class needs at least 3 samples for "
                             "cross-validation")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 301)))
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    for c in classes:
        idx = np.nonzero(y == c)[0]
        idx = idx[rng.permutation(idx.shape[0])]
        fold_of[idx] = np.arange(idx.shape[0]) % folds
    accs = []
    for f in range(folds):
        va = fold_of == f
        if not va.any():
            continue
        model = train_multiclass_svm(X[~va], y[~va], C, gamma)
        pred, _ = predict_svm(model, X[va])
        accs.append(float(np.mean(pred == y[va])))
    return accs


@dataclass
class OcSvmModel:
    """nu-one-class RBF machine with a logistic proximity map."""

    nu: float
    gamma: float
    sv_x: np.ndarray
    alpha: np.ndarray
    rho: float
    scale: float
    train_fraction_inside: float = field(default=0.0)


def train_ocsvm(X, nu: float = DEFAULT_NU, gamma: float = DEFAULT_GAMMA,
                tol: float = KKT_TOL, max_passes: int = 10000) -> OcSvmModel:
    """Fit the nu-one-class machine by pairwise coordinate descent.

    Minimizes (1/2) a'Ka subject to sum(a) = 1, 0 <= a_i <= 1/(nu n);
    at the optimum at most a nu fraction of training points fall
    outside (decision value below zero).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ConfigError("need at least 2 training rows")
    if not 0.0 < nu <= 1.0:
        raise ConfigError("nu must be in (0, 1]")
    n = X.shape[0]
    ub = 1.0 / (nu * n)
    K = rbf_kernel(X, X, gamma)
    alpha = np.full(n, 1.0 / n)
    g = K @ alpha
    for _ in range(max_passes):
        can_up = alpha < ub - 1e-14
        can_dn = alpha > 1e-14
        i = int(np.nonzero(can_up)[0][np.argmin(g[can_up])])
        j = int(np.nonzero(can_dn)[0][np.argmax(g[can_dn])])
        if g[j] - g[i] <= tol or i == j:
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            step = min(ub - alpha[i], alpha[j])
        else:
            step = min(ub - alpha[i], alpha[j], (g[j] - g[i]) / eta)
        if step <= 0.0:
            break
        alpha[i] += step
        alpha[j] -= step
        g += step * (K[i] - K[j])
    free = (alpha > 1e-12) & (alpha < ub - 1e-12)
    if free.any():
        # lowest margin-SV value, not the mean: every margin SV then
        # has f >= 0, so the finite solver tolerance cannot leak
        # boundary points into the nu outlier budget
        rho = float(np.min(g[free]))
    else:
        rho = float(0.5 * (g[alpha > 1e-12].max() + g[alpha < ub].min()))
    f_train = g - rho
    scale = float(np.median(np.abs(f_train)))
    if scale <= 0.0:
        scale = 1.0
    sv = np.nonzero(alpha > 1e-12)[0]
    inside = float(np.mean(f_train >= -tol))
    return OcSvmModel(nu=nu, gamma=gamma, sv_x=X[sv].copy(),
                      alpha=alpha[sv].copy(), rho=rho, scale=scale,
                      train_fraction_inside=inside)


def ocsvm_decision(model: OcSvmModel, X):
    """Decision values; nonnegative means inside the training support."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None]
    f = model.alpha @ rbf_kernel(model.sv_x, X, model.gamma) - model.rho
    return f[0] if single else f


def novelty_proximity(model: OcSvmModel, X):
    """Monotone map of the decision value into (0, 1).

    Logistic squashing at the scale of the median training decision
    magnitude; 0.5 sits on the decision boundary.
    """
    t = ocsvm_decision(model, X) / model.scale
    t = np.clip(t, -60.0, 60.0)
    return 1.0 / (1.0 + np.exp(-t))
