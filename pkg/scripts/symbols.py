"""Kinetic symbols, their gradients and critical values, and Stein-Tomas exponent arithmetic."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
STATIONARY_TOL = 1e-9


class SymbolDomainError(ValueError):
    """Raised for symbol parameters or dual points outside the supported domain."""


class ExponentDomainError(ValueError):
    """Raised when an exponent is requested outside its admissible q-range."""


class SymbolKind(str, Enum):
    CONTINUUM_BCS = "continuum-bcs"
    CONTINUUM_BCS_POWER = "continuum-bcs-power"
    LATTICE_STANDARD = "lattice-standard"
    LATTICE_MV = "lattice-mv"
    LATTICE_BCS = "lattice-bcs"


LATTICE_KINDS = {SymbolKind.LATTICE_STANDARD, SymbolKind.LATTICE_MV, SymbolKind.LATTICE_BCS}
CONTINUUM_KINDS = {SymbolKind.CONTINUUM_BCS, SymbolKind.CONTINUUM_BCS_POWER}
BASE_NAMES = ("standard", "mv")


@dataclass(frozen=True)
class SymbolSpec:
    """A kinetic symbol T(xi).

    Plain lattice kinds return the raw base P in [-1, 1]. BCS kinds return
    |P - mu|^(1/s). The continuum base is P = 1 - 4 pi^2 |xi|^2 with the
    Fermi shift folded in, so ``mu`` is pinned to 1 and level sheets sit at P = +-t.
    """

    kind: SymbolKind
    dimension: int
    mu: float = 0.0
    s: float = 1.0
    base: str = "standard"
    tau: float | None = None

    def __post_init__(self) -> None:
        kind = SymbolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise SymbolDomainError(f"dimension must be a positive integer, got {self.dimension!r}")
        if self.base not in BASE_NAMES:
            raise SymbolDomainError(f"base must be one of {BASE_NAMES}, got {self.base!r}")
        if not math.isfinite(float(self.s)) or float(self.s) < 1.0:
            raise SymbolDomainError(f"s must be >= 1, got {self.s!r}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "mu", float(self.mu))

        if kind == SymbolKind.CONTINUUM_BCS and self.s != 1.0:
            raise SymbolDomainError("continuum-bcs has s = 1; use continuum-bcs-power for s > 1")
        if kind == SymbolKind.CONTINUUM_BCS_POWER and self.s <= 1.0:
            raise SymbolDomainError(f"continuum-bcs-power needs s > 1, got {self.s}")
        if kind in (SymbolKind.LATTICE_STANDARD, SymbolKind.LATTICE_MV) and self.s != 1.0:
            raise SymbolDomainError(f"{kind.value} is not a fractional symbol; s must be 1")
        if kind in CONTINUUM_KINDS:
            object.__setattr__(self, "mu", 1.0)
        if kind == SymbolKind.LATTICE_BCS:
            zset = critical_values(SymbolSpec(_base_kind(self.base), self.dimension))
            gap = min(abs(self.mu - z) for z in zset)
            if gap < 1e-12:
                raise SymbolDomainError(f"mu={self.mu} is a critical value of the {self.base} symbol")
        if self.tau is not None and not float(self.tau) > 0:
            raise SymbolDomainError(f"tau must be positive, got {self.tau!r}")

    @property
    def is_lattice(self) -> bool:
        return self.kind in LATTICE_KINDS

    @property
    def is_bcs(self) -> bool:
        return self.kind in CONTINUUM_KINDS or self.kind == SymbolKind.LATTICE_BCS

    @property
    def power_inv_s(self) -> float:
        return 1.0 / self.s

    @property
    def base_name(self) -> str:
        if self.kind == SymbolKind.LATTICE_STANDARD:
            return "standard"
        if self.kind == SymbolKind.LATTICE_MV:
            return "mv"
        if self.kind == SymbolKind.LATTICE_BCS:
            return self.base
        return "continuum"

    def descriptor(self) -> dict:
        return {
            "kind": self.kind.value,
            "d": self.dimension,
            "mu": self.mu,
            "s": self.s,
            "base": self.base_name,
            "tau": low_energy_window(self),
        }


def _base_kind(base: str) -> SymbolKind:
    return SymbolKind.LATTICE_STANDARD if base == "standard" else SymbolKind.LATTICE_MV


def fermi_level(spec: SymbolSpec) -> float | None:
    """Level of the base symbol on which T vanishes, in base-symbol units."""
    if spec.kind == SymbolKind.LATTICE_BCS:
        return spec.mu
    if spec.kind in CONTINUUM_KINDS:
        return 0.0
    return None


def _as_points(spec: SymbolSpec, xi) -> np.ndarray:
    pts = np.asarray(xi, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1)
    if pts.shape[-1] != spec.dimension:
        raise SymbolDomainError(
            f"dual point has {pts.shape[-1]} components, symbol dimension is {spec.dimension}"
        )
    return pts


def base_symbol(spec: SymbolSpec, xi) -> np.ndarray:
    """Base symbol P on an array of dual points with trailing axis d. No domain check."""
    pts = _as_points(spec, xi)
    name = spec.base_name
    if name == "standard":
        return np.mean(np.cos(TWO_PI * pts), axis=-1)
    if name == "mv":
        return np.prod(np.cos(TWO_PI * pts), axis=-1)
    return 1.0 - (TWO_PI**2) * np.sum(pts * pts, axis=-1)


def symbol_values(spec: SymbolSpec, xi) -> np.ndarray:
    """T on an array of dual points, without the Brillouin-zone check."""
    p = base_symbol(spec, xi)
    level = fermi_level(spec)
    if level is None:
        return p
    t = np.abs(p - level)
    if spec.s != 1.0:
        t = t ** spec.power_inv_s
    return t


def _check_zone(spec: SymbolSpec, pts: np.ndarray) -> None:
    if not spec.is_lattice:
        return
    if np.any(pts < -0.5) or np.any(pts >= 0.5):
        raise SymbolDomainError("lattice dual points must lie in the Brillouin zone [-1/2, 1/2)^d")


def eval_symbol(spec: SymbolSpec, xi):
    """T(xi) for BCS kinds, the raw base P(xi) for plain lattice Laplacians."""
    pts = _as_points(spec, xi)
    _check_zone(spec, pts)
    values = symbol_values(spec, pts)
    if np.ndim(xi) <= 1:
        return float(values.reshape(-1)[0])
    return values


def grad_symbol(spec: SymbolSpec, xi) -> np.ndarray:
    """Analytic gradient of the base symbol P (not of |P - mu|)."""
    pts = _as_points(spec, xi)
    _check_zone(spec, pts)
    return base_gradient(spec, pts)


def base_gradient(spec: SymbolSpec, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    d = spec.dimension
    name = spec.base_name
    if name == "standard":
        return -(TWO_PI / d) * np.sin(TWO_PI * pts)
    if name == "continuum":
        return -2.0 * TWO_PI**2 * pts
    cosines = np.cos(TWO_PI * pts)
    sines = np.sin(TWO_PI * pts)
    grad = np.empty_like(pts)
    for j in range(d):
        others = np.ones(pts.shape[:-1])
        for k in range(d):
            if k != j:
                others = others * cosines[..., k]
        grad[..., j] = -TWO_PI * sines[..., j] * others
    return grad


def critical_values(spec: SymbolSpec) -> list[float]:
    """Critical values of a lattice base symbol by enumerating stationary candidates.

    Candidates are xi_j in {0, 1/4, 1/2}. Only 0 and 1/2 matter for the standard
    symbol; 1/4 enters for the cosine product where two vanishing factors give P = 0.
    """
    if not spec.is_lattice:
        raise SymbolDomainError("critical values are only enumerated for lattice kinds")
    plain = SymbolSpec(_base_kind(spec.base_name), spec.dimension)
    values = set()
    for candidate in itertools.product((0.0, 0.25, -0.5), repeat=spec.dimension):
        pt = np.array(candidate)
        if np.max(np.abs(base_gradient(plain, pt))) > STATIONARY_TOL:
            continue
        value = round(float(base_symbol(plain, pt)), 12) + 0.0
        values.add(value)
    return sorted(values)


def low_energy_window(spec: SymbolSpec) -> float | None:
    """tau: explicit value, else half the gap from the Fermi level to the nearest critical value."""
    if spec.tau is not None:
        return float(spec.tau)
    if spec.kind == SymbolKind.LATTICE_BCS:
        return 0.5 * min(abs(spec.mu - z) for z in critical_values(spec))
    if spec.kind in CONTINUUM_KINDS:
        # only critical value of 1 - 4 pi^2 |xi|^2 is its maximum 1
        return 0.5
    return None


def critical_distance(spec: SymbolSpec, level: float) -> float:
    """Distance from a base-symbol level to the critical-value set."""
    if spec.is_lattice:
        zset = critical_values(spec)
    else:
        zset = [1.0]
    return min(abs(level - z) for z in zset)


@dataclass(frozen=True)
class ExponentTable:
    d: int
    r: float
    epsilon: float = 1e-2

    def __post_init__(self) -> None:
        if not isinstance(self.d, int) or self.d < 1:
            raise ExponentDomainError(f"d must be a positive integer, got {self.d!r}")
        if not 0 < self.r < self.d:
            raise ExponentDomainError(f"decay rate r must lie in (0, d), got {self.r}")
        if self.epsilon < 0:
            raise ExponentDomainError(f"epsilon must be >= 0, got {self.epsilon}")


def sigma_exponent(table: ExponentTable, q: float) -> float:
    d = table.d
    if not 1.0 <= q < d:
        raise ExponentDomainError(f"sigma(q) needs 1 <= q < d={d}, got q={q}")
    return (d - 1) * q / (d - q)


def sigma_exponent_general(table: ExponentTable, q: float) -> float:
    d, r = table.d, table.r
    if not 1.0 <= q <= 1.0 + r:
        raise ExponentDomainError(f"sigma(q, r) needs 1 <= q <= 1 + r = {1 + r}, got q={q}")
    threshold = d / (d - r)
    if q >= threshold * (1.0 - 1e-14):
        if q >= d:
            raise ExponentDomainError(f"upper branch undefined for q={q} >= d={d}")
        return 2.0 * (d - 1 - r) * q / (d - q)
    return (2.0 * r * q + table.epsilon) / (2.0 * r * q - d * (q - 1.0))


def symbol_diagnostics(spec: SymbolSpec, resolution: int = 128) -> dict:
    """Measured c_P on the low-energy window and, for continuum kinds, fitted C1, C2.

    Growth is fitted as T >= C1 |xi|^g + C2 with g = 2/s.
    """
    d = spec.dimension
    tau = low_energy_window(spec)
    if spec.is_lattice:
        axis = (np.arange(resolution) + 0.5) / resolution - 0.5
    else:
        axis = (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    base = base_symbol(spec, mesh)
    grad_norm = np.linalg.norm(base_gradient(spec, mesh), axis=-1)

    level = fermi_level(spec)
    out: dict = {"tau": tau, "c_P": None, "growth_exponent": None, "C1": None, "C2": None}
    if level is not None and tau is not None:
        window = np.abs(base - level) < tau
        if np.any(window):
            out["c_P"] = float(np.min(grad_norm[window]))
    if spec.kind in CONTINUUM_KINDS:
        growth = 2.0 / spec.s
        radius = np.linalg.norm(mesh, axis=-1)
        values = symbol_values(spec, mesh)
        far = radius >= 1.0 / math.pi
        c1 = float(np.min(values[far] / radius[far] ** growth))
        out.update(
            growth_exponent=growth,
            C1=c1,
            C2=float(np.min(values - c1 * radius**growth)),
        )
    logger.debug("symbol diagnostics for %s: %s", spec.kind.value, out)
    return out
