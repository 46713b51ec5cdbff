"""The alpha-divergence behind the cross-match statistic, plus quadrature oracles.

For densities p, q and alpha in (0, 1),

    D_alpha(p, q) = (1 / (4 a (1-a))) * [ J - (2a - 1)^2 ],
    J = integral of (a p(x) - (1-a) q(x))^2 / (a p(x) + (1-a) q(x)) dx,

an f-divergence with weight ``f_weight``. By the Henze-Penrose limit, the
pooled-EMST cross-count C satisfies 1 - C (Np+Nq) / (2 Np Nq) -> D_alpha
with alpha = Np / (Np + Nq), which is what ``estimate_divergence`` computes
from data alone. The quadrature routines integrate the definitions directly
and serve as test oracles for the empirical estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .emst import PointCloud, fr_statistic
from .errors import DomainError, QuadratureFailure

QUAD_TOL = 1e-6


@dataclass(frozen=True)
class DivergenceEstimate:
    """Empirical divergence with its ingredients. ``d_hat`` may be negative
    at finite n; consumers that regress on it rely on the raw value."""

    d_hat: float
    c: int
    n_p: int
    n_q: int
    alpha: float


def estimate_divergence(xp: PointCloud, xq: PointCloud) -> DivergenceEstimate:
    """Plug-in divergence estimate from two samples, no density estimation.

    ``d_hat = 1 - C (n_p + n_q) / (2 n_p n_q)`` where C is the pooled-EMST
    cross-match count. alpha is induced by the sample counts, never supplied.
    """
    c, n_p, n_q = fr_statistic(xp, xq)
    total = n_p + n_q
    d_hat = 1.0 - c * total / (2.0 * n_p * n_q)
    return DivergenceEstimate(d_hat=d_hat, c=c, n_p=n_p, n_q=n_q, alpha=n_p / total)


def f_weight(t, alpha: float):
    """Convex weight f(t) of the divergence, f(1) = 0.

    Accepts a scalar or array ``t``; every entry must be positive.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0.0):
        raise DomainError("f_weight requires t > 0")
    beta = 1.0 - alpha
    val = ((alpha * t_arr - beta) ** 2 / (alpha * t_arr + beta) - (2.0 * alpha - 1.0) ** 2) / (
        4.0 * alpha * beta
    )
    return float(val) if np.isscalar(t) else val


@dataclass(frozen=True)
class DensityPair1D:
    """Two 1-D densities on a shared bounded interval, for quadrature oracles.

    Each density must integrate to 1 over [lower, upper] within 1e-6; the
    interval should cover essentially all of both masses (>= 8 standard
    deviations for the Gaussian constructor).
    """

    p: Callable[[float], float]
    q: Callable[[float], float]
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("empty evaluation interval")
        grid = np.linspace(self.lower, self.upper, 257)
        for name, dens in (("p", self.p), ("q", self.q)):
            if any(dens(x) < 0.0 for x in grid):
                raise ValueError(f"density {name} is negative on the interval")
            mass = _quad(dens, self.lower, self.upper)
            if abs(mass - 1.0) > QUAD_TOL:
                raise ValueError(f"density {name} integrates to {mass!r}, not 1")

    @classmethod
    def gaussian(
        cls,
        mean_p: float,
        mean_q: float,
        sigma_p: float = 1.0,
        sigma_q: float = 1.0,
        span: float = 10.0,
    ) -> "DensityPair1D":
        """Pair of Gaussian densities on an interval of ``span`` sigmas."""
        if span < 8.0:
            raise ValueError("interval must cover at least 8 standard deviations")
        lower = min(mean_p - span * sigma_p, mean_q - span * sigma_q)
        upper = max(mean_p + span * sigma_p, mean_q + span * sigma_q)

        def make_pdf(mu, sigma):
            norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

            def pdf(x, _mu=mu, _s=sigma, _n=norm):
                return _n * math.exp(-0.5 * ((x - _mu) / _s) ** 2)

            return pdf

        return cls(p=make_pdf(mean_p, sigma_p), q=make_pdf(mean_q, sigma_q), lower=lower, upper=upper)


def _quad(fn, lower, upper):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, lower, upper, epsabs=1e-10, epsrel=1e-10, limit=200)
    if err > QUAD_TOL:
        raise QuadratureFailure(f"quadrature error estimate {err:g} exceeds {QUAD_TOL:g}")
    return val


def divergence_quadrature(pair: DensityPair1D, alpha: float) -> float:
    """Numerically integrate the divergence definition; the oracle for
    ``estimate_divergence``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    beta = 1.0 - alpha

    def integrand(x):
        pv = pair.p(x)
        qv = pair.q(x)
        denom = alpha * pv + beta * qv
        if denom == 0.0:
            return 0.0
        return (alpha * pv - beta * qv) ** 2 / denom

    j = _quad(integrand, pair.lower, pair.upper)
    return (j - (2.0 * alpha - 1.0) ** 2) / (4.0 * alpha * beta)


def divergence_quadrature_f_form(pair: DensityPair1D, alpha: float) -> float:
    """Same divergence via the f-divergence form: integral of f(p/q) q.

    Used to cross-check ``divergence_quadrature`` against ``f_weight``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    beta = 1.0 - alpha

    def integrand(x):
        pv = pair.p(x)
        qv = pair.q(x)
        if qv == 0.0:
            # t -> inf limit of f(t) q: the quadratic term survives as a*p
            return pv / (4.0 * beta)
        return f_weight(pv / qv, alpha) * qv

    return _quad(integrand, pair.lower, pair.upper)


def a_alpha_quadrature(pair: DensityPair1D, alpha: float) -> float:
    """Numeric integral of A_alpha = 2 a (1-a) * integral of p q / (a p + (1-a) q).

    Relates to the divergence by D_alpha = 1 - A_alpha / (2 a (1-a)).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    beta = 1.0 - alpha

    def integrand(x):
        pv = pair.p(x)
        qv = pair.q(x)
        denom = alpha * pv + beta * qv
        if denom == 0.0:
            return 0.0
        return pv * qv / denom

    return 2.0 * alpha * beta * _quad(integrand, pair.lower, pair.upper)
