"""Fisher information estimation from perturbed sampling.

For a small parameter offset u, the divergence between p_theta and
p_(theta+u) is alpha (1-alpha) u' F u to second order (the curvature
constant is f''(1)/2 with f''(1) = 2 alpha (1-alpha); checked against exact
quadrature in the tests). Each perturbation therefore contributes one
quadratic-form estimate

    Q_k = d_hat_k / (alpha (1-alpha))   (= 4 d_hat_k for equal sample counts)

and sampling the model at M offsets yields the linear system Q ~ U f, where
f stacks the d diagonal entries of F followed by the row-major
upper-triangle off-diagonals, and each row of U holds the matching
direction component pairs [u_1^2 ... u_d^2, 2 u_1 u_2, ...].

Solvers:
  * ``ls_fim`` - plain least squares; not guaranteed positive semidefinite.
  * ``diagonal_fim`` - per-axis 1-D fits of the diagonal entries.
  * ``psd_constrained_fim`` - least squares under a fixed diagonal and a
    PSD constraint, by projected gradient descent.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .divergence import estimate_divergence
from .emst import PointCloud
from .errors import (
    DimensionMismatch,
    ModelFailure,
    NonConvergence,
    RankDeficient,
    ShapeError,
    SingularNormalEquations,
)
from .models import GenerativeModel
from .rng import CounterRng, derive_seed

COND_LIMIT = 1e12

WORKERS_ENV = "FIMEST_WORKERS"


# ---------------------------------------------------------------------------
# vectorization of symmetric matrices

@lru_cache(maxsize=64)
def _upper_indices(d: int):
    return np.triu_indices(d, k=1)


def packed_length(d: int) -> int:
    """Number of distinct entries of a symmetric d x d matrix."""
    return d * (d + 1) // 2


def _dim_from_packed(p: int) -> int:
    d = int((np.sqrt(8 * p + 1) - 1) / 2 + 0.5)
    if packed_length(d) != p:
        raise ShapeError(f"vector length {p} is not d(d+1)/2 for any integer d")
    return d


def vec_fim(matrix) -> np.ndarray:
    """Pack a symmetric matrix as [diagonal..., upper off-diagonals row-major]."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > 1e-8 * scale:
        raise ShapeError("matrix is not symmetric")
    iu, ju = _upper_indices(m.shape[0])
    return np.concatenate([np.diagonal(m), m[iu, ju]])


def mat_fim(f_vec) -> np.ndarray:
    """Inverse of ``vec_fim``: rebuild the full symmetric matrix."""
    v = np.asarray(f_vec, dtype=np.float64).reshape(-1)
    d = _dim_from_packed(v.shape[0])
    m = np.zeros((d, d))
    iu, ju = _upper_indices(d)
    m[iu, ju] = v[d:]
    m[ju, iu] = v[d:]
    np.fill_diagonal(m, v[:d])
    return m


# ---------------------------------------------------------------------------
# perturbation designs

def design_matrix_from_directions(directions) -> np.ndarray:
    """Row k = [u_k1^2 ... u_kd^2, 2 u_k1 u_k2, ..., 2 u_k(d-1) u_kd]."""
    u = np.asarray(directions, dtype=np.float64)
    if u.ndim != 2:
        raise ShapeError(f"expected an M x d direction matrix, got shape {u.shape}")
    iu, ju = _upper_indices(u.shape[1])
    return np.hstack([u * u, 2.0 * u[:, iu] * u[:, ju]])


@dataclass(frozen=True)
class PerturbationDesign:
    """M parameter offsets and the matching M x d(d+1)/2 design matrix."""

    dim: int
    directions: np.ndarray
    design_matrix: np.ndarray
    seed: int | None = None
    mode: str = "custom"
    scale: float | None = None

    @property
    def m(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def from_directions(cls, directions, seed=None, mode="custom", scale=None) -> "PerturbationDesign":
        """Build and rank-validate a design from explicit direction vectors."""
        u = np.asarray(directions, dtype=np.float64)
        if u.ndim != 2 or u.shape[0] < 1:
            raise ShapeError(f"expected an M x d direction matrix, got shape {u.shape}")
        d = u.shape[1]
        p = packed_length(d)
        if u.shape[0] < p:
            raise ValueError(f"need at least d(d+1)/2 = {p} directions, got {u.shape[0]}")
        matrix = design_matrix_from_directions(u)
        if np.linalg.matrix_rank(matrix) < p:
            raise RankDeficient(f"design matrix rank below {p}")
        u = u.copy()
        u.setflags(write=False)
        matrix.setflags(write=False)
        return cls(dim=d, directions=u, design_matrix=matrix, seed=seed, mode=mode, scale=scale)


def sample_perturbations(d: int, m: int, scale: float, rng_seed: int, mode: str = "ball") -> PerturbationDesign:
    """Draw M random directions and assemble the rank-validated design.

    ``mode="ball"``: uniform in the radius-``scale`` ball (norms drawn as
    radius * U^(1/d)). ``mode="gaussian"``: i.i.d. N(0, scale^2) components.
    Draw order per attempt: all M*d normals row-major, then (ball mode only)
    M radius uniforms. A rank-deficient draw is retried once on stream 1
    of the same seed before failing.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    p = packed_length(d)
    if m < p:
        raise ValueError(f"need at least d(d+1)/2 = {p} perturbations, got {m}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    if mode not in ("ball", "gaussian"):
        raise ValueError(f"unknown perturbation mode {mode!r}")
    last_error = None
    for attempt in (0, 1):
        rng = CounterRng(rng_seed, stream=attempt)
        g = rng.normal_matrix(m, d)
        if mode == "gaussian":
            directions = scale * g
        else:
            norms = np.linalg.norm(g, axis=1)
            norms[norms == 0.0] = 1.0
            radii = scale * rng.uniforms(m) ** (1.0 / d)
            directions = g * (radii / norms)[:, None]
        try:
            return PerturbationDesign.from_directions(
                directions, seed=rng_seed, mode=mode, scale=scale
            )
        except RankDeficient as exc:
            last_error = exc
    raise RankDeficient(f"design rank deficient after retry: {last_error}")


# ---------------------------------------------------------------------------
# Q estimation

@dataclass(frozen=True)
class QProvenance:
    index: int
    seed_ref: int | None
    seed_pert: int | None
    n_p: int | None
    n_q: int | None


@dataclass(frozen=True)
class QVector:
    """Per-perturbation quadratic-form estimates with their sampling provenance.

    Each value is one divergence estimate rescaled by the curvature constant:
    Q_k = d_hat_k / (alpha (1-alpha)), so Q_k -> u_k' F u_k for small u_k.
    """

    values: np.ndarray
    provenance: tuple[QProvenance, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(self.provenance) != values.shape[0]:
            raise ValueError("provenance length must match values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "provenance", tuple(self.provenance))


def _q_values(q) -> np.ndarray:
    if isinstance(q, QVector):
        return np.asarray(q.values, dtype=np.float64)
    return np.asarray(q, dtype=np.float64).reshape(-1)


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def _sample_or_fail(model: GenerativeModel, theta, n, seed, k):
    try:
        return model.sample(theta, n, seed)
    except Exception as exc:
        raise ModelFailure(f"model failed sampling perturbation {k}: {exc}", index=k) from exc


def estimate_q(
    model: GenerativeModel,
    theta,
    design: PerturbationDesign,
    n_p: int,
    n_q: int,
    rng_seed: int,
    *,
    shared_reference: bool = False,
    workers: int | None = None,
) -> QVector:
    """Estimate the quadratic form u_k' F u_k for every design row.

    Per row k, draws n_p reference samples from p_theta and n_q samples from
    p_(theta + u_k), estimates their divergence from the pooled-EMST
    statistic, and rescales by the curvature constant:
    Q_k = d_hat_k / (alpha (1-alpha)).

    Seeds are derived per perturbation: reference draw k uses path (k, 0) and
    perturbed draw k uses path (k, 1) under ``rng_seed``, so results are
    bit-identical for any worker count. With ``shared_reference`` every
    comparison reuses the k = 0 reference sample (one draw from path (0, 0))
    instead of resampling the reference per perturbation.
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != design.dim:
        raise DimensionMismatch(f"theta has length {theta.shape[0]}, design dimension is {design.dim}")
    if n_p < 2 or n_q < 2:
        raise ValueError("n_p and n_q must be >= 2")
    m = design.m
    shared_ref = None
    if shared_reference:
        shared_ref = _sample_or_fail(model, theta, n_p, derive_seed(rng_seed, 0, 0), 0)

    def job(k: int):
        seed_ref = derive_seed(rng_seed, 0 if shared_reference else k, 0)
        seed_pert = derive_seed(rng_seed, k, 1)
        xp = shared_ref if shared_ref is not None else _sample_or_fail(model, theta, n_p, seed_ref, k)
        xq = _sample_or_fail(model, theta + design.directions[k], n_q, seed_pert, k)
        est = estimate_divergence(PointCloud(xp), PointCloud(xq))
        value = est.d_hat / (est.alpha * (1.0 - est.alpha))
        return value, QProvenance(k, seed_ref, seed_pert, n_p, n_q)

    n_workers = _resolve_workers(workers)
    if n_workers == 1:
        results = [job(k) for k in range(m)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(job, range(m)))
    values = np.array([value for value, _ in results])
    return QVector(values=values, provenance=tuple(prov for _, prov in results))


def synthetic_q(design: PerturbationDesign, f_mat) -> QVector:
    """Noise-free Q = U f for a known matrix; bypasses all sampling."""
    values = design.design_matrix @ vec_fim(f_mat)
    prov = tuple(QProvenance(k, None, None, None, None) for k in range(design.m))
    return QVector(values=values, provenance=prov)


# ---------------------------------------------------------------------------
# solvers

@dataclass(frozen=True)
class FimEstimate:
    """Packed and full forms of an information-matrix estimate."""

    f_vec: np.ndarray
    f_mat: np.ndarray
    method: str
    residual_norm: float
    min_eigenvalue: float
    iterations: int = 0

    @property
    def dim(self) -> int:
        return self.f_mat.shape[0]


def fim_estimate_from_matrix(matrix, method: str = "external") -> FimEstimate:
    """Wrap a precomputed symmetric matrix (e.g. loaded from disk) as an estimate."""
    f_vec = vec_fim(matrix)
    f_mat = mat_fim(f_vec)
    return FimEstimate(
        f_vec=f_vec,
        f_mat=f_mat,
        method=method,
        residual_norm=0.0,
        min_eigenvalue=float(np.linalg.eigvalsh(f_mat)[0]),
    )


def _check_full_rank(design: PerturbationDesign) -> None:
    s = np.linalg.svd(design.design_matrix, compute_uv=False)
    if s[-1] == 0.0 or (s[0] / s[-1]) ** 2 > COND_LIMIT:
        raise SingularNormalEquations("normal equations numerically singular")


def ls_fim(design: PerturbationDesign, q) -> FimEstimate:
    """Plain least squares: minimize ||U f - Q||^2. May leave negative eigenvalues."""
    values = _q_values(q)
    if values.shape[0] != design.m:
        raise ShapeError(f"Q has {values.shape[0]} entries for {design.m} design rows")
    _check_full_rank(design)
    f_vec, *_ = np.linalg.lstsq(design.design_matrix, values, rcond=None)
    f_mat = mat_fim(f_vec)
    residual = float(np.linalg.norm(design.design_matrix @ f_vec - values))
    min_eig = float(np.linalg.eigvalsh(f_mat)[0])
    return FimEstimate(
        f_vec=vec_fim(f_mat),
        f_mat=f_mat,
        method="plain_ls",
        residual_norm=residual,
        min_eigenvalue=min_eig,
    )


def diagonal_fim(
    model: GenerativeModel,
    theta,
    magnitudes,
    n_p: int,
    n_q: int,
    rng_seed: int,
    *,
    workers: int | None = None,
) -> np.ndarray:
    """Fit each diagonal entry separately from axis-aligned perturbations.

    For axis i with magnitudes t_1..t_R, fits Q ~ F_ii t^2 through the
    origin (F_ii = sum Q_j t_j^2 / sum t_j^4) and clamps at zero.
    ``magnitudes`` is one positive sequence shared by all axes, or one
    sequence per axis. Seeds: reference (i, j, 0), perturbed (i, j, 1).
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    d = theta.shape[0]
    per_axis = _normalize_magnitudes(magnitudes, d)
    if n_p < 2 or n_q < 2:
        raise ValueError("n_p and n_q must be >= 2")

    def job(task):
        i, j, t = task
        xp = _sample_or_fail(model, theta, n_p, derive_seed(rng_seed, i, j, 0), i)
        pert = theta.copy()
        pert[i] += t
        xq = _sample_or_fail(model, pert, n_q, derive_seed(rng_seed, i, j, 1), i)
        est = estimate_divergence(PointCloud(xp), PointCloud(xq))
        return est.d_hat / (est.alpha * (1.0 - est.alpha))

    tasks = [(i, j, t) for i in range(d) for j, t in enumerate(per_axis[i])]
    n_workers = _resolve_workers(workers)
    if n_workers == 1:
        q_values = [job(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            q_values = list(pool.map(job, tasks))

    out = np.zeros(d)
    cursor = 0
    for i in range(d):
        t = np.asarray(per_axis[i])
        qs = np.asarray(q_values[cursor : cursor + t.shape[0]])
        cursor += t.shape[0]
        out[i] = max(float((qs * t**2).sum() / (t**4).sum()), 0.0)
    return out


def _normalize_magnitudes(magnitudes, d: int) -> list[list[float]]:
    if np.isscalar(magnitudes):
        per_axis = [[float(magnitudes)]] * d
    else:
        seq = list(magnitudes)
        if not seq:
            raise ValueError("need at least one magnitude per axis")
        if np.isscalar(seq[0]):
            per_axis = [[float(t) for t in seq]] * d
        else:
            per_axis = [[float(t) for t in axis] for axis in seq]
            if len(per_axis) != d:
                raise ValueError(f"got magnitude lists for {len(per_axis)} axes, expected {d}")
    for axis in per_axis:
        if len(axis) < 1 or any(t <= 0 for t in axis):
            raise ValueError("each axis needs at least one positive magnitude")
    return per_axis


def _project_feasible(mat: np.ndarray, targets: np.ndarray, tol: float, max_rounds: int = 200_000) -> np.ndarray:
    """Alternate diagonal reset and eigenvalue clipping until both hold.

    A zero diagonal target structurally forces its whole row and column to
    zero in any PSD matrix, so the reset step zeroes them directly; the
    plain alternation only approaches that tangentially (sublinearly).
    """
    m = 0.5 * (mat + mat.T)
    zero = np.asarray(targets) == 0.0
    any_zero = bool(zero.any())
    for _ in range(max_rounds):
        np.fill_diagonal(m, targets)
        if any_zero:
            m[zero, :] = 0.0
            m[:, zero] = 0.0
        lam, vecs = np.linalg.eigh(m)
        if lam[0] >= 0.0:
            return m
        m = (vecs * np.clip(lam, 0.0, None)) @ vecs.T
        m = 0.5 * (m + m.T)
        if float(np.abs(np.diagonal(m) - targets).max()) <= tol:
            return m
    raise NonConvergence("feasibility projection did not converge")


def psd_constrained_fim(
    design: PerturbationDesign,
    q,
    diag_targets,
    *,
    max_iter: int = 50_000,
    rel_tol: float = 1e-10,
    constraint_tol: float = 1e-10,
) -> FimEstimate:
    """Least squares with the diagonal pinned to ``diag_targets`` and a PSD solution.

    Projected gradient descent on the packed variable: a gradient step of
    length 1/L (L the top eigenvalue of U'U, i.e. the step for the halved
    quadratic), then projection onto {diag = targets} intersect PSD by
    alternating diagonal reset and eigenvalue clipping. Starts from the
    projected unconstrained solution. Stops when the relative objective
    change drops below ``rel_tol``; raises NonConvergence at the cap.

    The feasible set is never empty: the diagonal matrix of the (nonnegative)
    targets itself satisfies both constraints.
    """
    values = _q_values(q)
    if values.shape[0] != design.m:
        raise ShapeError(f"Q has {values.shape[0]} entries for {design.m} design rows")
    targets = np.asarray(diag_targets, dtype=np.float64).reshape(-1)
    if targets.shape[0] != design.dim:
        raise ShapeError(f"got {targets.shape[0]} diagonal targets for dimension {design.dim}")
    if np.any(targets < 0):
        raise ValueError("diagonal targets must be nonnegative")
    _check_full_rank(design)

    u_mat = design.design_matrix
    utu = u_mat.T @ u_mat
    utq = u_mat.T @ values
    qtq = float(values @ values)
    step = 1.0 / float(np.linalg.eigvalsh(utu)[-1])

    def objective(v):
        return float(v @ (utu @ v) - 2.0 * (utq @ v) + qtq)

    start, *_ = np.linalg.lstsq(u_mat, values, rcond=None)
    mat = _project_feasible(mat_fim(start), targets, constraint_tol)
    v = vec_fim(mat)
    obj = objective(v)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v = v - step * (utu @ v - utq)
        mat = _project_feasible(mat_fim(v), targets, constraint_tol)
        v = vec_fim(mat)
        new_obj = objective(v)
        done = abs(new_obj - obj) <= rel_tol * max(1.0, abs(obj))
        obj = new_obj
        if done:
            break
    else:
        raise NonConvergence(f"no convergence within {max_iter} iterations")

    residual = float(np.linalg.norm(u_mat @ v - values))
    min_eig = float(np.linalg.eigvalsh(mat)[0])
    return FimEstimate(
        f_vec=v,
        f_mat=mat,
        method="psd_constrained",
        residual_norm=residual,
        min_eigenvalue=min_eig,
        iterations=iterations,
    )
