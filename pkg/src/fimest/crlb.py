"""Estimator-variance bounds derived from an information-matrix estimate.

The inverse information matrix lower-bounds the covariance of any unbiased
parameter estimator. Estimated matrices can be rank-deficient, so inversion
goes through scaled-identity diagonal loading first; the log-det volume of
the (optionally weighted) bound summarizes overall estimation difficulty.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalFailure, ShapeError, SingularWeight
from .fim import FimEstimate, vec_fim

DEFAULT_LOADING = 1e-3


@dataclass(frozen=True)
class CrlbMatrix:
    """Symmetric positive definite covariance lower bound."""

    c_mat: np.ndarray
    loading_used: float

    def __post_init__(self):
        c = np.asarray(self.c_mat, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise NumericalFailure(f"expected a square matrix, got shape {c.shape}")
        if float(np.abs(c - c.T).max(initial=0.0)) > 1e-10 * max(1.0, float(np.abs(c).max())):
            raise NumericalFailure("bound matrix is not symmetric")
        c = 0.5 * (c + c.T)
        if float(np.linalg.eigvalsh(c)[0]) <= 0.0:
            raise NumericalFailure("bound matrix must be positive definite")
        c.setflags(write=False)
        object.__setattr__(self, "c_mat", c)

    @property
    def dim(self) -> int:
        return self.c_mat.shape[0]


@dataclass(frozen=True)
class WeightMatrix:
    """Diagonal nonnegative weights, e.g. per-parameter importance."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] < 1:
            raise ValueError("need at least one weight")
        if np.any(w < 0) or not np.isfinite(w).all():
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def loading_amount(f_mat: np.ndarray, epsilon: float) -> float:
    """Scaled-identity loading coefficient: eps * tr(F)/d, or eps if tr <= 0."""
    trace = float(np.trace(f_mat))
    d = f_mat.shape[0]
    return epsilon * trace / d if trace > 0 else epsilon


def regularize_fim(f: FimEstimate, epsilon: float) -> FimEstimate:
    """Add scaled-identity diagonal loading; shifts every eigenvalue up equally."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    amount = loading_amount(f.f_mat, epsilon)
    mat = f.f_mat + amount * np.eye(f.dim)
    return replace(
        f,
        f_vec=vec_fim(mat),
        f_mat=mat,
        min_eigenvalue=float(np.linalg.eigvalsh(mat)[0]),
    )


def invert_to_crlb(f: FimEstimate, epsilon: float = DEFAULT_LOADING) -> CrlbMatrix:
    """Invert the loaded information matrix through its eigendecomposition."""
    reg = regularize_fim(f, epsilon)
    lam, vecs = np.linalg.eigh(reg.f_mat)
    if lam[0] <= 0.0:
        raise NumericalFailure(
            f"regularized spectrum still has eigenvalue {lam[0]:g} <= 0; increase epsilon"
        )
    c = (vecs / lam) @ vecs.T
    return CrlbMatrix(c_mat=0.5 * (c + c.T), loading_used=loading_amount(f.f_mat, epsilon))


def weighted_volume(c: CrlbMatrix, w: WeightMatrix) -> float:
    """log det(V D W V') where C = V D V'; equals log det(C) + log det(W)."""
    if w.weights.shape[0] != c.dim:
        raise ShapeError(f"got {w.weights.shape[0]} weights for dimension {c.dim}")
    if np.any(w.weights == 0.0):
        raise SingularWeight("zero weight makes the log-determinant undefined")
    lam = np.linalg.eigvalsh(c.c_mat)
    return float(np.log(lam).sum() + np.log(w.weights).sum())
