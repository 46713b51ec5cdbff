"""Typed exceptions raised across the package."""

from __future__ import annotations


class FimestError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteInput(FimestError):
    """Input contains NaN or infinite values."""


class DuplicatePoints(FimestError):
    """Two identical rows in a point set; the spanning tree would be ambiguous."""


class LabelMismatch(FimestError):
    """Label vector length disagrees with the node count."""


class DimensionMismatch(FimestError):
    """Point sets (or parameter vectors) with incompatible dimensions."""


class ShapeError(FimestError):
    """Array shape incompatible with the requested operation."""


class DomainError(FimestError):
    """Scalar argument outside the mathematical domain of the function."""


class QuadratureFailure(FimestError):
    """Numeric integration did not reach the requested tolerance."""


class RankDeficient(FimestError):
    """Perturbation design matrix has deficient column rank."""


class SingularNormalEquations(FimestError):
    """Normal equations of the least-squares system are numerically singular."""


class NonConvergence(FimestError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class ModelFailure(FimestError):
    """A generative model failed while sampling; carries the perturbation index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NumericalFailure(FimestError):
    """A numerically required property (e.g. positive spectrum) did not hold."""


class SingularWeight(FimestError):
    """A weight of zero makes the log-determinant volume undefined."""


class SingularCovariance(FimestError):
    """Sample covariance is numerically singular and cannot be inverted."""


class _ExternalError(FimestError):
    """Base for external-process model errors; keeps captured stderr."""

    def __init__(self, message: str, stderr: str = ""):
        if stderr.strip():
            message = f"{message} [stderr: {stderr.strip()[:500]}]"
        super().__init__(message)
        self.stderr = stderr


class SpawnFailure(_ExternalError):
    """The external model command could not be started."""


class Timeout(_ExternalError):
    """The external model did not answer within its time budget."""


class ProtocolError(_ExternalError):
    """The external model violated the request/response protocol."""
