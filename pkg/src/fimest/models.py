"""Generative model contract: builtin samplers and an external-process adapter.

A generative model is anything that maps ``(theta, n, seed)`` to an n x K
sample matrix, bit-identically for identical arguments. The builtin
Gaussian mean model draws through the documented counter-based scheme
(see ``fimest.rng``), so an external implementation can match it exactly.

External model protocol (bit-exact):
  request  = one line of JSON ``{"theta":[f64...],"n":uint,"seed":uint64}``
             (compact separators, newline-terminated) on the child's stdin;
  response = exactly n lines on stdout, each K comma-separated decimal
             floats; the child exits 0. Any deviation raises ProtocolError.
A child may keep reading request lines until EOF; this adapter sends one
request per spawned process and then closes stdin.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ProtocolError, SingularCovariance, SpawnFailure, Timeout
from .rng import CounterRng

MODEL_STREAM = 0  # stream id consumed by builtin samplers

COND_LIMIT = 1e12


@runtime_checkable
class GenerativeModel(Protocol):
    """Sampling contract: n i.i.d. draws from p_theta, deterministic per seed."""

    param_dim: int
    output_dim: int

    def sample(self, theta: np.ndarray, n: int, seed: int) -> np.ndarray: ...


def _check_theta(theta, param_dim: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != param_dim:
        raise ValueError(f"theta has length {theta.shape[0]}, expected {param_dim}")
    return theta


@dataclass(frozen=True)
class GaussianMeanModel:
    """N(theta, sigma^2 I) in R^dim; the parameter is the mean, so d = K."""

    dim: int
    sigma: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def param_dim(self) -> int:
        return self.dim

    @property
    def output_dim(self) -> int:
        return self.dim

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        theta = _check_theta(theta, self.dim)
        if n < 1:
            raise ValueError("n must be >= 1")
        z = CounterRng(seed, MODEL_STREAM).normal_matrix(n, self.dim)
        return theta + self.sigma * z


def request_line(theta, n: int, seed: int) -> str:
    """The exact request record sent to an external model (without newline)."""
    payload = {"theta": [float(t) for t in np.asarray(theta).reshape(-1)], "n": int(n), "seed": int(seed)}
    return json.dumps(payload, separators=(",", ":"))


@dataclass(frozen=True)
class ExternalModel:
    """Adapter running a sampler subprocess speaking the line protocol above."""

    command: tuple[str, ...]
    param_dim: int
    output_dim: int
    timeout: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(self.command))
        if len(self.command) == 0:
            raise ValueError("empty command")
        if self.param_dim < 1 or self.output_dim < 1:
            raise ValueError("dimensions must be >= 1")

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        theta = _check_theta(theta, self.param_dim)
        if n < 1:
            raise ValueError("n must be >= 1")
        request = request_line(theta, n, seed) + "\n"
        try:
            proc = subprocess.run(
                list(self.command),
                input=request,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            stderr = exc.stderr
            if isinstance(stderr, bytes):
                stderr = stderr.decode(errors="replace")
            raise Timeout(
                f"model command gave no answer within {self.timeout:g}s", stderr=stderr or ""
            ) from exc
        except OSError as exc:
            raise SpawnFailure(f"could not start {self.command[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ProtocolError(
                f"model command exited with status {proc.returncode}", stderr=proc.stderr
            )
        return self._parse_response(proc.stdout, n, proc.stderr)

    def _parse_response(self, stdout: str, n: int, stderr: str) -> np.ndarray:
        lines = stdout.splitlines()
        while lines and lines[-1] == "":
            lines.pop()
        if len(lines) != n:
            raise ProtocolError(f"expected {n} response rows, got {len(lines)}", stderr=stderr)
        out = np.empty((n, self.output_dim))
        for i, line in enumerate(lines):
            parts = line.split(",")
            if len(parts) != self.output_dim:
                raise ProtocolError(
                    f"response row {i + 1} has {len(parts)} fields, expected {self.output_dim}",
                    stderr=stderr,
                )
            try:
                out[i] = [float(part) for part in parts]
            except ValueError as exc:
                raise ProtocolError(f"response row {i + 1} is not numeric: {exc}", stderr=stderr) from exc
        if not np.isfinite(out).all():
            raise ProtocolError("response contains non-finite values", stderr=stderr)
        return out


def sample_fim_oracle(x) -> np.ndarray:
    """Inverse sample covariance: the side-information benchmark estimate.

    Only valid as a Fisher information estimate when the family is known to
    be Gaussian with mean parameterization; used as the oracle competitor.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an n x K sample matrix")
    n, k = x.shape
    if n < 2:
        raise SingularCovariance("need at least 2 samples for a covariance")
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    cond = np.linalg.cond(cov)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularCovariance(f"sample covariance condition {cond:g} exceeds {COND_LIMIT:g}")
    inv = np.linalg.inv(cov)
    return 0.5 * (inv + inv.T)
