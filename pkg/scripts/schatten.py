"""Birman-Schwinger operators, Schatten and weak-Schatten norms, and the counting check N_e = n(1, BS(e))."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from spectra import SpectrumError, SpectrumResult, count_below, fit_line, negative_eigenvalues
from symbols import SymbolSpec
from torus import (
    DEFAULT_DENSE_CAP,
    DenseCapError,
    PotentialField,
    TorusGrid,
    circulant_matrix,
    multiplier_kernel,
    symbol_on_grid,
)

logger = logging.getLogger(__name__)

BS_GUARD = 1e-8
DEFAULT_DROP_LARGEST = 2
SECULAR_FLOOR = 1e-12
PHASE_TABLE_LIMIT = 20_000_000


@dataclass(frozen=True)
class SingularSpectrum:
    svals: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        values = np.clip(np.sort(np.asarray(self.svals, dtype=float).reshape(-1))[::-1], 0.0, None)
        object.__setattr__(self, "svals", values)


def _signed_root(values: np.ndarray) -> np.ndarray:
    # sgn(0) = 1
    return np.sqrt(np.abs(values)) * np.where(values < 0, -1.0, 1.0)


def _resolvent_kernel(spec: SymbolSpec, grid: TorusGrid, e: float) -> np.ndarray:
    return multiplier_kernel(1.0 / (symbol_on_grid(spec, grid) + e))


def birman_schwinger(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    e: float,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> np.ndarray:
    """BS(e) = |V|^(1/2) (T + e)^-1 V^(1/2) as a dense matrix."""
    if not e > 0:
        raise ValueError(f"Birman-Schwinger operator needs e > 0, got {e}")
    if grid.size > dense_cap:
        raise DenseCapError(f"dense assembly needs N={grid.size} <= dense_cap={dense_cap}")
    resolvent = circulant_matrix(_resolvent_kernel(spec, grid, e), grid)
    left = np.sqrt(np.abs(V.flat))
    right = _signed_root(V.flat)
    return left[:, None] * resolvent * right[None, :]


def birman_schwinger_on_support(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    e: float,
) -> tuple[np.ndarray, np.ndarray]:
    """BS(e) compressed to supp V; returns (flat support indices, matrix).

    The nonzero spectrum equals that of the full operator since rows and
    columns off the support vanish.
    """
    if not e > 0:
        raise ValueError(f"Birman-Schwinger operator needs e > 0, got {e}")
    support = V.support()
    kernel = _resolvent_kernel(spec, grid, e).reshape(-1)
    offsets = _support_offsets(grid, support)
    values = V.flat[support]
    block = kernel[offsets]
    return support, np.sqrt(np.abs(values))[:, None] * block * _signed_root(values)[None, :]


def _support_offsets(grid: TorusGrid, support: np.ndarray) -> np.ndarray:
    """Flat index of x_a - x_b mod L for every pair of support points."""
    L = grid.points_per_axis
    index = np.stack(np.unravel_index(support, grid.shape), axis=-1)
    diff = (index[:, None, :] - index[None, :, :]) % L
    strides = L ** np.arange(grid.dimension - 1, -1, -1)
    return diff @ strides


class _CompressedResolvent:
    """Resolvent kernel restricted to the pair offsets of a fixed support."""

    def __init__(self, spec: SymbolSpec, grid: TorusGrid, support: np.ndarray) -> None:
        self.spec = spec
        self.grid = grid
        offsets = _support_offsets(grid, support)
        self.unique, self.inverse = np.unique(offsets, return_inverse=True)
        self.inverse = self.inverse.reshape(offsets.shape)
        self.symbol = symbol_on_grid(spec, grid).reshape(-1)
        self.phases = None
        if self.unique.size * grid.size <= PHASE_TABLE_LIMIT:
            index = np.stack(np.unravel_index(self.unique, grid.shape), axis=-1)
            k = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=-1)
            self.phases = np.cos(2.0 * math.pi * (index @ k.T) / grid.points_per_axis)

    def __call__(self, e: float) -> np.ndarray:
        weights = 1.0 / (self.symbol + e)
        if self.phases is not None:
            values = self.phases @ weights / self.grid.size
        else:
            values = multiplier_kernel(weights.reshape(self.grid.shape)).reshape(-1)[self.unique]
        return values[self.inverse]


def secular_negative_eigenvalues(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    floor: float = SECULAR_FLOOR,
    xtol: float = 1e-12,
) -> SpectrumResult:
    """Negative eigenvalues of T - V for V >= 0 from eigenvalue-one crossings of BS(e).

    The j-th largest eigenvalue of BS(e) is nonincreasing in e, and it equals 1
    exactly at e = e_j. Roots are bracketed in log e on [floor, max V], so
    eigenvalues below the floor are not reported.
    """
    if not V.is_nonnegative:
        raise ValueError("secular solver requires V >= 0")
    support = V.support()
    descriptor = dict(grid=grid.descriptor(), symbol=spec.descriptor(), potential=V.descriptor(), method="secular")
    if support.size == 0:
        return SpectrumResult(np.zeros(0), **descriptor)

    roots_v = np.sqrt(V.flat[support])
    kernel = _CompressedResolvent(spec, grid, support)

    def top_eigenvalues(e: float) -> np.ndarray:
        matrix = roots_v[:, None] * kernel(e) * roots_v[None, :]
        return scipy.linalg.eigvalsh(0.5 * (matrix + matrix.T))[::-1]

    upper = float(np.max(V.flat))
    at_floor = top_eigenvalues(floor)
    n_bound = int(np.count_nonzero(at_floor > 1.0))
    found = []
    residuals = []
    for j in range(n_bound):
        def crossing(log_e: float, j: int = j) -> float:
            return top_eigenvalues(math.exp(log_e))[j] - 1.0

        hi = math.log(upper)
        if crossing(hi) > 0:
            raise SpectrumError(f"eigenvalue {j + 1} of BS(e) exceeds 1 at e = max V")
        root = math.exp(brentq(crossing, math.log(floor), hi, xtol=xtol))
        found.append(root)
        residuals.append(abs(crossing(math.log(root))))
    logger.debug("secular solve on %d support sites: %d eigenvalues above %g", support.size, n_bound, floor)
    return SpectrumResult(np.array(found), np.array(residuals), **descriptor)


def singular_values(M, source: str = "") -> SingularSpectrum:
    try:
        values = scipy.linalg.svdvals(np.asarray(M))
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SpectrumError(f"singular value decomposition failed: {exc}") from exc
    return SingularSpectrum(values, source)


def schatten_norm_power(S: SingularSpectrum, p: float) -> float:
    """sum_n s_n^p."""
    if not p > 0:
        raise ValueError(f"Schatten exponent must be positive, got {p}")
    return float(np.sum(S.svals**p))


def schatten_norm(S: SingularSpectrum, p: float) -> float:
    return schatten_norm_power(S, p) ** (1.0 / p)


def weak_schatten_norm(S: SingularSpectrum, p: float) -> float:
    """sup_{m >= 1} s_m m^(1/p) with 1-based m over the nonincreasing list."""
    if not p > 0:
        raise ValueError(f"Schatten exponent must be positive, got {p}")
    if not S.svals.size:
        return 0.0
    m = np.arange(1, S.svals.size + 1, dtype=float)
    return float(np.max(S.svals * m ** (1.0 / p)))


def counting_n(S: SingularSpectrum, lam: float) -> int:
    """n(lambda) = #{n : s_n > lambda}."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return int(np.count_nonzero(S.svals > lam))


@dataclass(frozen=True)
class BSCheck:
    e: float
    N_e: int
    n1: int
    indeterminate: bool

    @property
    def agree(self) -> bool:
        return self.N_e == self.n1

    def to_dict(self) -> dict:
        return {
            "e": self.e,
            "N_e": self.N_e,
            "n1": self.n1,
            "agree": self.agree,
            "indeterminate": self.indeterminate,
        }


def verify_bs_principle(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    e: float,
    guard: float = BS_GUARD,
    dense_cap: int = DEFAULT_DENSE_CAP,
    spectrum: SpectrumResult | None = None,
) -> BSCheck:
    """Compare N_e(V) with n(1, BS(e)); cases grazing either threshold are indeterminate."""
    if not V.is_nonnegative:
        raise ValueError("the counting identity is checked for V >= 0 only")
    if not e > 0:
        raise ValueError(f"e must be positive, got {e}")
    if spectrum is None:
        spectrum = negative_eigenvalues(spec, V, grid, dense_cap)
    svals = singular_values(birman_schwinger(spec, V, grid, e, dense_cap), source=f"BS({e:g})")
    n_e = count_below(spectrum, e)
    n1 = counting_n(svals, 1.0)
    grazing = np.any(np.abs(spectrum.negative_eigenvalues - e) <= guard * max(1.0, e))
    grazing = grazing or bool(np.any(np.abs(svals.svals - 1.0) <= guard))
    if n_e != n1 and not grazing:
        logger.warning("counting mismatch at e=%g: N_e=%d, n(1)=%d", e, n_e, n1)
    return BSCheck(float(e), n_e, n1, bool(grazing))


@dataclass(frozen=True)
class TraceCheck:
    lhs: float
    rhs: float
    m: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-8 * abs(self.rhs)


def _psd_power(matrix: np.ndarray, power: float) -> np.ndarray:
    w, vecs = scipy.linalg.eigh(matrix)
    w = np.clip(w, 0.0, None)
    return (vecs * w**power) @ vecs.conj().T


def _require_psd(matrix: np.ndarray, name: str, tol: float = 1e-10) -> np.ndarray:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > tol * scale:
        raise ValueError(f"{name} is not Hermitian")
    if np.min(scipy.linalg.eigvalsh(matrix), initial=0.0) < -tol * scale:
        raise ValueError(f"{name} is not positive semidefinite")
    return 0.5 * (matrix + matrix.conj().T)


def alt_trace_check(A, B, m: float) -> TraceCheck:
    """||B^1/2 A B^1/2||_m^m against tr(B^(m/2) A^m B^(m/2))."""
    if m < 1:
        raise ValueError(f"trace inequality needs m >= 1, got {m}")
    A = _require_psd(A, "A")
    B = _require_psd(B, "B")
    root_b = _psd_power(B, 0.5)
    inner = root_b @ A @ root_b
    lhs = float(np.sum(np.clip(scipy.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None) ** m))
    half_b = _psd_power(B, 0.5 * m)
    rhs = float(np.real(np.trace(half_b @ _psd_power(A, m) @ half_b)))
    return TraceCheck(lhs, rhs, float(m))


@dataclass(frozen=True)
class BSNormSweep:
    e_grid: list[float]
    m: float
    norms: list[float]
    fit_points: int
    slope: float | None
    log_ratios: list[float] = field(default_factory=list)

    @property
    def log_ratio_growth(self) -> float | None:
        """Largest ||BS||_m^m / log(2+1/e)^m over the fit window, relative to its largest-e value."""
        if not self.log_ratios:
            return None
        return max(self.log_ratios) / self.log_ratios[0]

    def to_dict(self) -> dict:
        return {
            "e_grid": self.e_grid,
            "m": self.m,
            "norms": self.norms,
            "fit_points": self.fit_points,
            "slope": self.slope,
            "log_ratios": self.log_ratios,
            "log_ratio_growth": self.log_ratio_growth,
        }


def bs_norm_sweep(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    e_grid,
    m: float,
    drop_largest: int = DEFAULT_DROP_LARGEST,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> BSNormSweep:
    """||BS(e)||_m^m over an e-grid with a log-log slope on all but the largest e values."""
    if drop_largest < 0:
        raise ValueError(f"drop_largest must be nonnegative, got {drop_largest}")
    e_sorted = sorted((float(e) for e in e_grid), reverse=True)
    norms = [
        schatten_norm_power(singular_values(birman_schwinger(spec, V, grid, e, dense_cap)), m) for e in e_sorted
    ]
    window = list(zip(e_sorted, norms))[drop_largest:]
    window = [(e, n) for e, n in window if n > 0]
    slope = None
    if len(window) >= 3:
        slope, _, _ = fit_line(np.log([e for e, _ in window]), np.log([n for _, n in window]))
    ratios = [n / math.log(2.0 + 1.0 / e) ** m for e, n in window]
    return BSNormSweep(e_sorted, float(m), norms, len(window), slope, ratios)
