"""Evaluation metrics: unlearning accuracy, retain accuracy, Frechet distance.

Classifier-based metrics take a `predict` callable mapping a batch of
points to integer labels, so they work with any decision rule. The
Frechet distance between Gaussian fits is

    ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2})

computed through a symmetric eigendecomposition square root with a small
diagonal regularizer added before taking the root.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch

Array = np.ndarray


def unlearning_accuracy(samples: Array, predict, target_class: int) -> float:
    """Fraction of samples the classifier does NOT assign to the target."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if len(samples) == 0:
        raise ValueError("no samples given")
    labels = np.asarray(predict(samples))
    return float((labels != target_class).mean())


def retain_accuracy(samples_by_class: dict, predict) -> float:
    """Mean over retained classes of the per-class correct rate."""
    if not samples_by_class:
        raise ValueError("no retain classes given")
    accs = []
    for cls, pts in samples_by_class.items():
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if len(pts) == 0:
            raise ValueError(f"class {cls} has no samples")
        labels = np.asarray(predict(pts))
        accs.append(float((labels == cls).mean()))
    return float(np.mean(accs))


@dataclass
class FeatureStats:
    mean: Array
    cov: Array
    n: int


def feature_stats(X: Array) -> FeatureStats:
    """Mean and unbiased covariance of feature rows; needs n >= 2."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) < 2:
        raise ValueError(f"need at least 2 rows for covariance, got {len(X)}")
    mean = X.mean(axis=0)
    diff = X - mean
    cov = diff.T @ diff / (len(X) - 1)
    cov = 0.5 * (cov + cov.T)
    return FeatureStats(mean=mean, cov=cov, n=len(X))


def matrix_sqrt_psd(M: Array, sym_tol: float = 1e-8) -> Array:
    """Symmetric PSD square root via eigendecomposition.

    Slightly negative eigenvalues from rounding are clamped to zero;
    clearly asymmetric input is rejected.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"need a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    vals = np.clip(vals, 0.0, None)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (root + root.T)


def frechet_distance(real: FeatureStats, gen: FeatureStats,
                     eps: float = 1e-6) -> float:
    """Frechet distance between the two Gaussian fits.

    eps * I is added to both covariances before the matrix square root;
    the product root is evaluated symmetrically as
    (S_r^{1/2} S_g S_r^{1/2})^{1/2}, and the result is clamped at zero
    against negative rounding.
    """
    if real.mean.shape != gen.mean.shape:
        raise ShapeMismatch(
            f"feature dims differ: {real.mean.shape} vs {gen.mean.shape}")
    d = len(real.mean)
    cr = real.cov + eps * np.eye(d)
    cg = gen.cov + eps * np.eye(d)
    sr = matrix_sqrt_psd(cr)
    inner = sr @ cg @ sr
    tr_root = float(np.trace(matrix_sqrt_psd(0.5 * (inner + inner.T))))
    diff = real.mean - gen.mean
    fd = float(diff @ diff) + float(np.trace(real.cov) + np.trace(gen.cov)) \
        - 2.0 * tr_root
    return max(0.0, fd)


@dataclass
class EvalReport:
    ua: float
    ira: float
    fd: float
    per_class_acc: dict = field(default_factory=dict)
