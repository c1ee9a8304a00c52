"""PCA on the sample covariance via symmetric eigendecomposition.

The covariance is d x d (d <= 1024 here) while n can be much larger,
so we decompose the covariance rather than running an SVD of the data
matrix. Components carry a deterministic sign: the coordinate with the
largest magnitude (lowest index on ties) is made positive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

log = logging.getLogger(__name__)


def validate_embeddings(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError(f"embedding matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ContractError("embedding matrix contains NaN or Inf")
    return X


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray             # (d,)
    components: np.ndarray       # (r, d), orthonormal rows
    variance_ratios: np.ndarray  # (r,), non-increasing, >= 0


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def pca_fit_transform(X: np.ndarray, target_dim: int = 30) -> tuple[PcaModel, np.ndarray]:
    """Fit PCA and project X onto the top target_dim components.

    Requires n >= 2 and 1 <= target_dim <= min(n - 1, d). Zero-variance
    input yields all-zero variance ratios (the basis is then arbitrary
    but still orthonormal) and a warning.
    """
    X = validate_embeddings(X)
    n, d = X.shape
    if n < 2:
        raise ContractError(f"need at least 2 rows, got {n}")
    r = target_dim
    if not (1 <= r <= min(n - 1, d)):
        raise ContractError(
            f"target_dim {r} out of range [1, {min(n - 1, d)}] for shape {X.shape}"
        )
    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # covariance is PSD; tiny negative eigenvalues are roundoff
    eigvals = np.clip(eigvals, 0.0, None)
    total = float(eigvals.sum())
    components = _fix_signs(eigvecs[:, :r].T)
    if total <= 0.0:
        log.warning("zero-variance data: variance ratios set to 0")
        ratios = np.zeros(r)
    else:
        ratios = eigvals[:r] / total
    model = PcaModel(mean=mean, components=components, variance_ratios=ratios)
    return model, centered @ components.T


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = validate_embeddings(X)
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    return Y @ model.components + model.mean
