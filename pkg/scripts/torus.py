"""Finite-torus discretization and DFT assembly of H = T(-i grad) - V."""

from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg

from symbols import SymbolSpec, symbol_values

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 8192
DEFAULT_ALIASING_FACTOR = 100.0
POTENTIAL_FAMILIES = ("zero", "gaussian", "plateau", "bump", "delta", "random", "csv")


class GridError(ValueError):
    """Raised for malformed grids, potentials or vectors."""


class DenseCapError(GridError):
    """Raised when a dense assembly would exceed the configured size cap."""


class AliasingError(GridError):
    """Raised when the frequency cutoff does not dominate the potential."""


@dataclass(frozen=True)
class TorusGrid:
    """Periodic grid of L^d points with spacing h (h = 1 is the lattice Z^d)."""

    dimension: int
    points_per_axis: int
    spacing: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise GridError(f"grid dimension must be a positive integer, got {self.dimension!r}")
        L = self.points_per_axis
        if not isinstance(L, int) or L < 1:
            raise GridError(f"points_per_axis must be a positive integer, got {L!r}")
        if L != 1 and L % 2:
            raise GridError(f"points_per_axis must be even (or 1), got {L}")
        if not float(self.spacing) > 0:
            raise GridError(f"spacing must be positive, got {self.spacing!r}")
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @property
    def box_length(self) -> float:
        return self.points_per_axis * self.spacing

    def descriptor(self) -> dict:
        return {"d": self.dimension, "L": self.points_per_axis, "h": self.spacing}


def check_compatible(spec: SymbolSpec, grid: TorusGrid) -> None:
    if spec.dimension != grid.dimension:
        raise GridError(f"symbol dimension {spec.dimension} != grid dimension {grid.dimension}")
    if spec.is_lattice and grid.spacing != 1.0:
        raise GridError(f"lattice symbols need spacing h = 1, got {grid.spacing}")


def frequencies(grid: TorusGrid) -> np.ndarray:
    """Dual points k/(Lh) in DFT storage order, shape (N, d)."""
    axis = np.fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    mesh = np.meshgrid(*([axis] * grid.dimension), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, grid.dimension)


def positions(grid: TorusGrid) -> np.ndarray:
    """Signed physical coordinates of grid points (index 0 at the origin), shape (N, d)."""
    L = grid.points_per_axis
    axis = np.fft.fftfreq(L, d=1.0 / L) * grid.spacing
    mesh = np.meshgrid(*([axis] * grid.dimension), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, grid.dimension)


@functools.lru_cache(maxsize=32)
def symbol_on_grid(spec: SymbolSpec, grid: TorusGrid) -> np.ndarray:
    """T sampled on the dual grid, shape grid.shape, read-only."""
    check_compatible(spec, grid)
    values = symbol_values(spec, frequencies(grid)).reshape(grid.shape)
    values.setflags(write=False)
    return values


def spectral_resolution(spec: SymbolSpec, grid: TorusGrid) -> float:
    """Smallest positive value of T on the grid (finite-size gap estimate)."""
    values = symbol_on_grid(spec, grid)
    positive = values[values > 1e-14]
    return float(positive.min()) if positive.size else 0.0


@dataclass(frozen=True, eq=False)
class PotentialField:
    values: np.ndarray
    family: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if np.iscomplexobj(arr):
            raise GridError("potential must be real-valued")
        arr = np.array(arr, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise GridError("potential contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.flat)

    def scaled(self, kappa: float) -> "PotentialField":
        params = dict(self.params, kappa=float(kappa) * float(self.params.get("kappa", 1.0)))
        return PotentialField(self.values * kappa, self.family, params, self.seed)

    def positive_part(self) -> "PotentialField":
        return PotentialField(np.maximum(self.values, 0.0), self.family, dict(self.params), self.seed)

    def translated(self, shift) -> "PotentialField":
        shift = tuple(int(s) for s in shift)
        moved = np.roll(self.values, shift, axis=tuple(range(self.values.ndim)))
        return PotentialField(moved, self.family, dict(self.params, shift=list(shift)), self.seed)

    def descriptor(self) -> dict:
        out = {"family": self.family, **self.params}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _check_field(V: PotentialField, grid: TorusGrid) -> None:
    if V.values.shape != grid.shape:
        raise GridError(f"potential shape {V.values.shape} does not match grid shape {grid.shape}")


def _radius(grid: TorusGrid, center=None) -> np.ndarray:
    pts = positions(grid)
    if center is not None:
        offset = np.asarray(center, dtype=float)
        box = grid.box_length
        pts = (pts - offset + box / 2) % box - box / 2
    return np.linalg.norm(pts, axis=-1).reshape(grid.shape)


def zero_potential(grid: TorusGrid) -> PotentialField:
    return PotentialField(np.zeros(grid.shape), "zero")


def gaussian_potential(grid: TorusGrid, amplitude: float, width: float, center=None) -> PotentialField:
    if width <= 0:
        raise GridError(f"gaussian width must be positive, got {width}")
    r = _radius(grid, center)
    values = amplitude * np.exp(-(r**2) / (2.0 * width**2))
    return PotentialField(values, "gaussian", {"amplitude": amplitude, "width": width})


def plateau_potential(grid: TorusGrid, amplitude: float, radius: float, center=None) -> PotentialField:
    values = np.where(_radius(grid, center) <= radius, float(amplitude), 0.0)
    return PotentialField(values, "plateau", {"amplitude": amplitude, "radius": radius})


def bump_potential(grid: TorusGrid, amplitude: float, radius: float, center=None) -> PotentialField:
    """Smooth compactly supported bump A exp(1 - 1/(1 - (r/R)^2))."""
    if radius <= 0:
        raise GridError(f"bump radius must be positive, got {radius}")
    rho = _radius(grid, center) / radius
    inside = rho < 1.0
    values = np.zeros(grid.shape)
    values[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - rho[inside] ** 2))
    return PotentialField(values, "bump", {"amplitude": amplitude, "radius": radius})


def delta_potential(grid: TorusGrid, amplitude: float) -> PotentialField:
    values = np.zeros(grid.shape)
    values[(0,) * grid.dimension] = amplitude
    return PotentialField(values, "delta", {"amplitude": amplitude})


def random_potential(grid: TorusGrid, amplitude: float, seed: int, radius: float | None = None) -> PotentialField:
    """Seeded nonnegative field, uniform in [0, amplitude], optionally on a finite box."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, amplitude, size=grid.shape)
    params = {"amplitude": amplitude}
    if radius is not None:
        mask = np.all(np.abs(positions(grid)) <= radius, axis=-1).reshape(grid.shape)
        values = np.where(mask, values, 0.0)
        params["radius"] = radius
    return PotentialField(values, "random", params, seed=int(seed))


def load_potential_csv(path: Path, grid: TorusGrid) -> PotentialField:
    """Read rows ``i_1, ..., i_d, value``; missing sites are zero, a header row is allowed."""
    values = np.zeros(grid.shape)
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != grid.dimension + 1:
                if line_no == 1:
                    continue
                raise GridError(f"{path} line {line_no}: expected {grid.dimension + 1} columns")
            try:
                index = tuple(int(c) % grid.points_per_axis for c in row[:-1])
                values[index] = float(row[-1])
            except ValueError as exc:
                if line_no == 1:
                    continue
                raise GridError(f"{path} line {line_no}: {exc}") from exc
    return PotentialField(values, "csv", {"csv": str(path)})


def build_potential(grid: TorusGrid, block: dict, base_dir: Path | None = None) -> PotentialField:
    """Generate a potential from a config descriptor."""
    family = block.get("family", "zero")
    amplitude = float(block.get("amplitude", 1.0))
    center = block.get("center")
    if family == "zero":
        return zero_potential(grid)
    if family == "gaussian":
        return gaussian_potential(grid, amplitude, float(block.get("width", 1.0)), center)
    if family == "plateau":
        return plateau_potential(grid, amplitude, float(block.get("radius", 1.0)), center)
    if family == "bump":
        return bump_potential(grid, amplitude, float(block.get("radius", 2.0)), center)
    if family == "delta":
        return delta_potential(grid, amplitude)
    if family == "random":
        radius = block.get("radius")
        return random_potential(grid, amplitude, int(block.get("seed", 0)), None if radius is None else float(radius))
    if family == "csv":
        path = Path(block["csv"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_potential_csv(path, grid)
    raise GridError(f"unknown potential family {family!r}; expected one of {POTENTIAL_FAMILIES}")


def lq_norm_power(V: PotentialField, q: float, grid: TorusGrid) -> float:
    """sum |V|^q h^d."""
    if not q > 0:
        raise GridError(f"norm exponent must be positive, got {q}")
    return float(np.sum(np.abs(V.values) ** q) * grid.cell_volume)


def lq_norm(V: PotentialField, q: float, grid: TorusGrid) -> float:
    if math.isinf(q):
        return float(np.max(np.abs(V.values))) if V.values.size else 0.0
    return lq_norm_power(V, q, grid) ** (1.0 / q)


def check_frequency_cutoff(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    factor: float = DEFAULT_ALIASING_FACTOR,
) -> None:
    """Continuum mode: T at the Nyquist frequency must be >= factor * max|V|."""
    if spec.is_lattice:
        return
    nyquist = np.zeros(spec.dimension)
    nyquist[0] = 0.5 / grid.spacing
    t_cut = float(symbol_values(spec, nyquist))
    v_max = float(np.max(np.abs(V.values))) if V.values.size else 0.0
    if t_cut < factor * v_max:
        raise AliasingError(
            f"frequency cutoff T={t_cut:.4g} is below {factor:g} x max|V|={v_max:.4g}; refine h"
        )


def apply_hamiltonian(spec: SymbolSpec, V: PotentialField, grid: TorusGrid, u) -> np.ndarray:
    """DFT^-1 (T DFT u) - V u."""
    _check_field(V, grid)
    u = np.asarray(u)
    if u.size != grid.size:
        raise GridError(f"vector has {u.size} entries, grid has {grid.size}")
    field_u = u.reshape(grid.shape)
    kinetic = np.fft.ifftn(symbol_on_grid(spec, grid) * np.fft.fftn(field_u))
    return (kinetic - V.values * field_u).reshape(u.shape)


def circulant_matrix(kernel: np.ndarray, grid: TorusGrid, rows: int = 512) -> np.ndarray:
    """Dense matrix M[a, b] = kernel[(x_a - x_b) mod L] for a real kernel on the grid."""
    L = grid.points_per_axis
    N = grid.size
    index = np.stack(np.unravel_index(np.arange(N), grid.shape), axis=-1)
    flat_kernel = kernel.reshape(-1)
    strides = L ** np.arange(grid.dimension - 1, -1, -1)
    out = np.empty((N, N), dtype=flat_kernel.dtype)
    for start in range(0, N, rows):
        block = index[start : start + rows]
        diff = (block[:, None, :] - index[None, :, :]) % L
        out[start : start + rows] = flat_kernel[diff @ strides]
    return out


def multiplier_kernel(multiplier: np.ndarray) -> np.ndarray:
    """Real convolution kernel of an even Fourier multiplier."""
    return np.fft.ifftn(multiplier).real


def assemble_dense(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> np.ndarray:
    """Real symmetric matrix of H in the position basis."""
    _check_field(V, grid)
    if grid.size > dense_cap:
        raise DenseCapError(f"dense assembly needs N={grid.size} <= dense_cap={dense_cap}")
    matrix = circulant_matrix(multiplier_kernel(symbol_on_grid(spec, grid)), grid)
    matrix[np.diag_indices_from(matrix)] -= V.flat
    return 0.5 * (matrix + matrix.T)


@dataclass(frozen=True)
class RefinementReport:
    spacing: float
    coarse: list[float]
    fine: list[float]
    max_relative_change: float
    tolerance: float

    @property
    def within_tolerance(self) -> bool:
        return self.max_relative_change < self.tolerance

    def to_dict(self) -> dict:
        return {
            "h": self.spacing,
            "coarse": self.coarse,
            "fine": self.fine,
            "max_relative_change": self.max_relative_change,
            "tolerance": self.tolerance,
            "within_tolerance": self.within_tolerance,
        }


def refinement_check(
    spec: SymbolSpec,
    potential_factory: Callable[[TorusGrid], PotentialField],
    grid: TorusGrid,
    n_lowest: int = 5,
    tolerance: float = 0.05,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> RefinementReport:
    """Compare the lowest eigenvalues of T - V at h and h/2 on the same box."""
    if spec.is_lattice:
        raise GridError("refinement is a continuum-mode diagnostic")
    fine_grid = TorusGrid(grid.dimension, 2 * grid.points_per_axis, grid.spacing / 2.0)
    lowest = []
    for g in (grid, fine_grid):
        matrix = assemble_dense(spec, potential_factory(g), g, dense_cap)
        lowest.append(scipy.linalg.eigvalsh(matrix, subset_by_index=[0, min(n_lowest, g.size) - 1]))
    coarse, fine = lowest
    scale = np.maximum(np.maximum(np.abs(coarse), np.abs(fine)), 1e-12)
    change = float(np.max(np.abs(coarse - fine) / scale))
    logger.info("refinement h=%g -> %g: max relative change %.3g", grid.spacing, fine_grid.spacing, change)
    return RefinementReport(grid.spacing, coarse.tolist(), fine.tolist(), change, tolerance)
