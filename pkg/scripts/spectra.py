"""Negative spectrum of H, the counting function N_e, Riesz means and log-moments."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import IntegrationWarning, quad

from symbols import SymbolSpec
from torus import DEFAULT_DENSE_CAP, PotentialField, TorusGrid, assemble_dense

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-12
RESIDUAL_TOL = 1e-8
LOG_TWO = math.log(2.0)


class SpectrumError(RuntimeError):
    """Raised when an eigensolve fails or misses its residual contract."""


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not converge."""


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Negative eigenvalues -e_j of H stored as e_1 >= e_2 >= ... > 0."""

    negative_eigenvalues: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grid: dict = field(default_factory=dict)
    symbol: dict = field(default_factory=dict)
    potential: dict = field(default_factory=dict)
    method: str = "dense"

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.negative_eigenvalues, dtype=float).reshape(-1))[::-1]
        if values.size and values[-1] <= 0:
            raise SpectrumError("stored negative eigenvalues must be reported as e_j > 0")
        object.__setattr__(self, "negative_eigenvalues", values)
        object.__setattr__(self, "residuals", np.asarray(self.residuals, dtype=float).reshape(-1))

    @classmethod
    def from_values(cls, values) -> "SpectrumResult":
        return cls(np.asarray(values, dtype=float), method="given")

    @property
    def count(self) -> int:
        return int(self.negative_eigenvalues.size)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "count": self.count,
            "negative_eigenvalues": self.negative_eigenvalues.tolist(),
            "residuals": self.residuals.tolist(),
            "grid": self.grid,
            "symbol": self.symbol,
            "potential": self.potential,
        }


def negative_eigenvalues(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    dense_cap: int = DEFAULT_DENSE_CAP,
    zero_tol: float = ZERO_TOL,
) -> SpectrumResult:
    """Dense Hermitian diagonalization; eigenvalues within zero_tol of 0 count as zero."""
    matrix = assemble_dense(spec, V, grid, dense_cap)
    try:
        w, vecs = scipy.linalg.eigh(matrix)
    except scipy.linalg.LinAlgError as exc:
        raise SpectrumError(f"diagonalization failed on N={grid.size}: {exc}") from exc

    negative = w < -zero_tol
    e = -w[negative]
    residuals = np.zeros(0)
    if e.size:
        v = vecs[:, negative]
        residuals = np.linalg.norm(matrix @ v - v * w[negative], axis=0)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.max(residuals) > RESIDUAL_TOL * scale:
            raise SpectrumError(f"eigenpair residual {np.max(residuals):.3g} exceeds {RESIDUAL_TOL:g}")
    logger.debug("N=%d: %d negative eigenvalues", grid.size, e.size)
    return SpectrumResult(
        e,
        residuals,
        grid=grid.descriptor(),
        symbol=spec.descriptor(),
        potential=V.descriptor(),
    )


def count_below(result: SpectrumResult, e: float) -> int:
    """N_e = #{j : e_j > e}."""
    if e < 0:
        raise ValueError(f"count_below needs e >= 0, got {e}")
    return int(np.count_nonzero(result.negative_eigenvalues > e))


def riesz_mean(result: SpectrumResult, gamma: float) -> float:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return float(np.sum(result.negative_eigenvalues**gamma))


def riesz_mean_from_counting(result: SpectrumResult, gamma: float) -> float:
    """gamma * integral_0^inf e^(gamma-1) N_e de, integrated piece by piece over the step function."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    breaks = np.concatenate(([0.0], np.unique(result.negative_eigenvalues)))
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        n = count_below(result, 0.5 * (lo + hi))
        piece, _ = quad(lambda x: gamma * x ** (gamma - 1.0), lo, hi, epsabs=0.0, epsrel=1e-12)
        total += n * piece
    return total


def log_bracket_log(e) -> np.ndarray:
    """log <1/e> with <x> = (2 + x^2)^(1/2), computed without overflow."""
    e = np.asarray(e, dtype=float)
    return 0.5 * np.logaddexp(LOG_TWO, -2.0 * np.log(e))


def log_moment(result: SpectrumResult, gamma: float) -> float:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not result.count:
        return 0.0
    return float(np.sum(log_bracket_log(result.negative_eigenvalues) ** (-gamma)))


@dataclass(frozen=True)
class LogRepresentationCheck:
    e: float
    gamma: float
    closed_form: float
    quadrature: float
    tolerance: float

    @property
    def relative_error(self) -> float:
        return abs(self.quadrature - self.closed_form) / abs(self.closed_form)

    @property
    def agree(self) -> bool:
        return self.relative_error <= self.tolerance


def check_log_representation(e: float, gamma: float, tolerance: float = 1e-6) -> LogRepresentationCheck:
    """Compare (log<1/e>)^-gamma with its integral representation over (0, e].

    The integral gamma * int_0^e L(r)^(-gamma-1) <1/r>^-2 dr / r^3 is taken in
    u = log(1/r), where the integrand becomes gamma L^(-gamma-1) / (1 + 2 e^(-2u)).
    """
    if not e > 0:
        raise ValueError(f"e must be positive, got {e}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")

    def integrand(u: float) -> float:
        big_l = 0.5 * np.logaddexp(LOG_TWO, 2.0 * u)
        return gamma * big_l ** (-gamma - 1.0) / (1.0 + 2.0 * math.exp(-2.0 * u))

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(integrand, math.log(1.0 / e), math.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
        except IntegrationWarning as exc:
            raise QuadratureError(f"log-moment quadrature did not converge for e={e}, gamma={gamma}: {exc}") from exc
    closed = float(log_bracket_log(e) ** (-gamma))
    return LogRepresentationCheck(e, gamma, closed, float(value), tolerance)


def fit_line(x, y) -> tuple[float, float, float]:
    """Least-squares line y = a x + b; returns (a, b, rms residual)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("a line fit needs at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), residual
