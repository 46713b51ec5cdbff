"""Desk-scale Monte Carlo sweeps comparing the divergence-based information
estimate against the inverse-sample-covariance benchmark on the Gaussian
mean model (true matrix: identity for unit sigma).

Two sweeps share one engine and one CSV schema:
  * error vs data dimension at fixed sample size;
  * estimator gap vs sample size at fixed dimension.

Cells are keyed (K, n, run); every cell derives its own seed substream, so
records and CSV bytes are identical for any worker count or run order.

Error metric: mean squared error per matrix entry, i.e. the squared
Frobenius norm of the estimator error divided by K^2. The per-entry mean is
what makes errors comparable across dimensions (the raw Frobenius sum grows
with the K^2 entries it accumulates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fim import ls_fim, estimate_q, packed_length, sample_perturbations
from .models import GaussianMeanModel, sample_fim_oracle
from .rng import derive_seed

CSV_HEADER = "K,n,run,mse_dhalf,mse_sample"

DEFAULT_MASTER_SEED = 1729


@dataclass(frozen=True)
class ExperimentConfig:
    dims: tuple[int, ...]
    n_samples: tuple[int, ...]
    sigma_u2: float = 0.05
    m_factor: int = 10
    monte_carlo_runs: int = 10
    master_seed: int = DEFAULT_MASTER_SEED
    sigma: float = 1.0
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(k) for k in self.dims))
        object.__setattr__(self, "n_samples", tuple(int(n) for n in self.n_samples))
        if not self.dims or any(k < 1 for k in self.dims):
            raise ValueError("dims must be nonempty positive integers")
        if not self.n_samples or any(n < 2 for n in self.n_samples):
            raise ValueError("n_samples must be nonempty integers >= 2")
        if not self.sigma_u2 > 0:
            raise ValueError("sigma_u2 must be positive")
        if self.m_factor < 1 or self.monte_carlo_runs < 1:
            raise ValueError("m_factor and monte_carlo_runs must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class MseRecord:
    dim: int
    n: int
    run: int
    mse_dhalf: float
    mse_sample: float

    def __post_init__(self):
        if self.mse_dhalf < 0 or self.mse_sample < 0:
            raise ValueError("squared errors cannot be negative")


def _run_cell(config: ExperimentConfig, k: int, n: int, run: int) -> MseRecord:
    model = GaussianMeanModel(dim=k, sigma=config.sigma)
    true_fim = np.eye(k) / config.sigma**2
    cell_seed = derive_seed(config.master_seed, k, n, run)
    design = sample_perturbations(
        d=k,
        m=config.m_factor * packed_length(k),
        scale=math.sqrt(config.sigma_u2),
        rng_seed=derive_seed(cell_seed, 0),
        mode="gaussian",
    )
    q = estimate_q(model, np.zeros(k), design, n, n, rng_seed=derive_seed(cell_seed, 1))
    estimate = ls_fim(design, q)
    entries = k * k
    mse_dhalf = float(np.linalg.norm(estimate.f_mat - true_fim, "fro") ** 2) / entries
    bench_sample = model.sample(np.zeros(k), n, derive_seed(cell_seed, 2))
    mse_sample = float(np.linalg.norm(sample_fim_oracle(bench_sample) - true_fim, "fro") ** 2) / entries
    return MseRecord(dim=k, n=n, run=run, mse_dhalf=mse_dhalf, mse_sample=mse_sample)


def _run_grid(config: ExperimentConfig) -> list[MseRecord]:
    records = [
        _run_cell(config, k, n, run)
        for k in config.dims
        for n in config.n_samples
        for run in range(config.monte_carlo_runs)
    ]
    records.sort(key=lambda r: (r.dim, r.n, r.run))
    if config.output is not None:
        write_records_csv(records, config.output)
    return records


def run_gaussian_mse_vs_dim(config: ExperimentConfig) -> list[MseRecord]:
    """Sweep data dimension at fixed sample size(s); records per (K, n, run)."""
    return _run_grid(config)


def run_gaussian_gap_vs_n(config: ExperimentConfig) -> list[MseRecord]:
    """Sweep sample size at fixed dimension; the gap of interest per record
    is ``mse_dhalf - mse_sample``."""
    if len(config.dims) != 1:
        raise ValueError("gap-vs-n sweep expects exactly one dimension")
    return _run_grid(config)


def write_records_csv(records, path) -> None:
    """Stable CSV emission: sorted rows, floats at 17 significant digits."""
    rows = sorted(records, key=lambda r: (r.dim, r.n, r.run))
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.dim},{r.n},{r.run},{r.mse_dhalf:.17g},{r.mse_sample:.17g}\n")


def summarize(records) -> list[dict]:
    """Per-cell means, pooled-ready: one dict per (K, n)."""
    cells: dict[tuple[int, int], list[MseRecord]] = {}
    for r in records:
        cells.setdefault((r.dim, r.n), []).append(r)
    out = []
    for (k, n), rs in sorted(cells.items()):
        dhalf = np.array([r.mse_dhalf for r in rs])
        sample = np.array([r.mse_sample for r in rs])
        out.append(
            {
                "K": k,
                "n": n,
                "runs": len(rs),
                "mean_mse_dhalf": float(dhalf.mean()),
                "mean_mse_sample": float(sample.mean()),
                "sem_mse_dhalf": float(dhalf.std(ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else 0.0,
                "sem_mse_sample": float(sample.std(ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else 0.0,
                "mean_gap": float((dhalf - sample).mean()),
                "sem_gap": float((dhalf - sample).std(ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else 0.0,
            }
        )
    return out


def desk_scale_mse_config(output: str | None = None, master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Scaled-down dimension sweep used by the acceptance gate."""
    return ExperimentConfig(
        dims=(4, 6, 8),
        n_samples=(500,),
        sigma_u2=0.05,
        m_factor=10,
        monte_carlo_runs=10,
        master_seed=master_seed,
        output=output,
    )


def desk_scale_gap_config(output: str | None = None, master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Scaled-down sample-size sweep used by the acceptance gate."""
    return ExperimentConfig(
        dims=(8,),
        n_samples=(250, 500, 1000, 2000),
        sigma_u2=0.05,
        m_factor=10,
        monte_carlo_runs=10,
        master_seed=master_seed,
        output=output,
    )


def paper_scale_mse_config(output: str | None = None, master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Full-size dimension sweep (hours of compute; not exercised by tests)."""
    return ExperimentConfig(
        dims=tuple(range(4, 15)),
        n_samples=(1000,),
        sigma_u2=0.05,
        m_factor=50,
        monte_carlo_runs=25,
        master_seed=master_seed,
        output=output,
    )
