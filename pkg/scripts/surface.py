"""Level sets S_t with Leray quadrature, Fourier decay of the surface measure, and the surface operator."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from symbols import SymbolSpec, base_gradient, base_symbol, critical_distance, fermi_level
from torus import PotentialField, TorusGrid, positions

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-13
LEVEL_TOL = 1e-10
MAX_NEWTON_STEPS = 60
DEFAULT_SAFE_DISTANCE = 1e-6
FT_CHUNK = 2048

# Six Kuhn tetrahedra of the unit cube, all sharing the 000-111 diagonal.
_CUBE_CORNERS = np.array(list(itertools.product((0, 1), repeat=3)))
_TETRAHEDRA = []
for _perm in itertools.permutations(range(3)):
    _path = [np.zeros(3, dtype=int)]
    for _axis in _perm:
        _step = _path[-1].copy()
        _step[_axis] = 1
        _path.append(_step)
    _TETRAHEDRA.append([int(np.flatnonzero((_CUBE_CORNERS == p).all(axis=1))[0]) for p in _path])
_TET_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def _tet_edge(a: int, b: int) -> int:
    return _TET_EDGES.index((min(a, b), max(a, b)))


def _tet_triangle_table() -> dict[tuple[bool, ...], list[tuple[int, int, int]]]:
    table = {}
    for signs in itertools.product((False, True), repeat=4):
        pos = [i for i in range(4) if signs[i]]
        neg = [i for i in range(4) if not signs[i]]
        if len(pos) in (0, 4):
            tris = []
        elif len(pos) in (1, 3):
            odd = pos[0] if len(pos) == 1 else neg[0]
            others = [i for i in range(4) if i != odd]
            tris = [tuple(_tet_edge(odd, o) for o in others)]
        else:
            a, b = pos
            c, d = neg
            tris = [
                (_tet_edge(a, c), _tet_edge(a, d), _tet_edge(b, d)),
                (_tet_edge(a, c), _tet_edge(b, d), _tet_edge(b, c)),
            ]
        table[signs] = tris
    return table


_TET_TABLE = _tet_triangle_table()


class SurfaceError(ValueError):
    """Raised for unsupported, critical or empty level sets and unreliable decay fits."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Quadrature points on S_t with Leray weights dSigma / |grad P|."""

    points: np.ndarray
    weights: np.ndarray
    level: float
    sheets: tuple[float, ...]
    sheet_index: np.ndarray
    resolution: int
    periodic: bool
    symbol: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def mean_spacing(self) -> float:
        """Mean nearest-neighbour distance between quadrature points."""
        if self.size < 2:
            raise SurfaceError("mesh has fewer than two points")
        if self.periodic:
            shifted = np.mod(self.points + 0.5, 1.0)
            shifted[shifted >= 1.0] = 0.0
            tree = cKDTree(shifted, boxsize=1.0)
            dist, _ = tree.query(shifted, k=2)
        else:
            tree = cKDTree(self.points)
            dist, _ = tree.query(self.points, k=2)
        return float(np.mean(dist[:, 1]))

    def rows(self) -> list[list[float]]:
        return [
            [self.level, self.sheets[int(s)], *map(float, p), float(w)]
            for p, w, s in zip(self.points, self.weights, self.sheet_index)
        ]


def _newton_project(spec: SymbolSpec, pts: np.ndarray, level: float) -> np.ndarray:
    """x <- x - (P - c) grad P / |grad P|^2 until |P - c| <= NEWTON_TOL."""
    pts = pts.copy()
    for _ in range(MAX_NEWTON_STEPS):
        resid = base_symbol(spec, pts) - level
        if np.max(np.abs(resid), initial=0.0) <= NEWTON_TOL:
            break
        grad = base_gradient(spec, pts)
        norm2 = np.sum(grad * grad, axis=-1)
        step = np.where(norm2 > 1e-30, resid / np.where(norm2 > 1e-30, norm2, 1.0), 0.0)
        pts -= step[:, None] * grad
    return pts


def _vertex_axis(spec: SymbolSpec, level: float, resolution: int) -> tuple[np.ndarray, float, bool]:
    """Cell-centred sampling axis; the lattice axis wraps, the continuum box bounds the sheet."""
    if spec.is_lattice:
        return (np.arange(resolution) + 0.5) / resolution - 0.5, 1.0 / resolution, True
    # 1 - 4 pi^2 |xi|^2 = level  <=>  |xi| = sqrt(1 - level) / (2 pi)
    radius = math.sqrt(max(1.0 - level, 0.0)) / (2.0 * math.pi)
    half = 1.25 * radius + 1e-3
    step = 2.0 * half / resolution
    return (np.arange(resolution) + 0.5) * step - half, step, False


def _sampled_field(spec: SymbolSpec, axis: np.ndarray, step: float, periodic: bool, level: float):
    """Vertex coordinates and level-shifted values; periodic grids get one wrapped extra layer."""
    d = spec.dimension
    full = np.concatenate([axis, [axis[-1] + step]]) if periodic else axis
    mesh = np.stack(np.meshgrid(*([full] * d), indexing="ij"), axis=-1)
    values = base_symbol(spec, mesh) - level
    return mesh, values


def _interpolate(pa, pb, fa, fb):
    frac = fa / (fa - fb)
    return pa + frac[..., None] * (pb - pa)


def _marching_squares(mesh: np.ndarray, values: np.ndarray):
    """Segments of the zero contour, with saddle cells resolved by the cell-centre value."""
    n = values.shape[0] - 1
    sl0, sl1 = slice(0, n), slice(1, n + 1)
    corner_pts = [mesh[sl0, sl0], mesh[sl1, sl0], mesh[sl1, sl1], mesh[sl0, sl1]]
    corner_val = [values[sl0, sl0], values[sl1, sl0], values[sl1, sl1], values[sl0, sl1]]
    corner_pts = [c.reshape(-1, 2) for c in corner_pts]
    corner_val = [c.reshape(-1) for c in corner_val]
    positive = [v > 0 for v in corner_val]

    crossings = []
    crossed = []
    for k in range(4):
        a, b = k, (k + 1) % 4
        crossed.append(positive[a] != positive[b])
        with np.errstate(divide="ignore", invalid="ignore"):
            crossings.append(_interpolate(corner_pts[a], corner_pts[b], corner_val[a], corner_val[b]))
    crossed = np.stack(crossed, axis=1)
    crossings = np.stack(crossings, axis=1)
    n_cross = crossed.sum(axis=1)

    starts, ends = [], []
    two = np.flatnonzero(n_cross == 2)
    if two.size:
        edges = np.nonzero(crossed[two])[1].reshape(-1, 2)
        starts.append(crossings[two, edges[:, 0]])
        ends.append(crossings[two, edges[:, 1]])
    four = np.flatnonzero(n_cross == 4)
    if four.size:
        centre = sum(v[four] for v in corner_val) > 0
        joined = centre == positive[0][four]
        pairs = np.where(joined[:, None, None], [[0, 1], [2, 3]], [[3, 0], [1, 2]])
        for p in range(2):
            starts.append(crossings[four, pairs[:, p, 0]])
            ends.append(crossings[four, pairs[:, p, 1]])
    if not starts:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.concatenate(starts), np.concatenate(ends)


def _marching_tetrahedra(mesh: np.ndarray, values: np.ndarray):
    """Triangles of the zero isosurface over Kuhn-split cubes."""
    n = values.shape[0] - 1
    corners_pts, corners_val = [], []
    for offset in _CUBE_CORNERS:
        sl = tuple(slice(o, o + n) for o in offset)
        corners_pts.append(mesh[sl].reshape(-1, 3))
        corners_val.append(values[sl].reshape(-1))

    triangles = []
    for tet in _TETRAHEDRA:
        pts = [corners_pts[c] for c in tet]
        vals = [corners_val[c] for c in tet]
        signs = np.stack([v > 0 for v in vals], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            edge_pts = np.stack(
                [_interpolate(pts[a], pts[b], vals[a], vals[b]) for a, b in _TET_EDGES], axis=1
            )
        codes = signs.astype(int) @ (1 << np.arange(4))
        for pattern, tris in _TET_TABLE.items():
            if not tris:
                continue
            code = sum(1 << i for i, s in enumerate(pattern) if s)
            cells = np.flatnonzero(codes == code)
            if not cells.size:
                continue
            for tri in tris:
                triangles.append(edge_pts[cells][:, list(tri)])
    if not triangles:
        return np.zeros((0, 3, 3))
    return np.concatenate(triangles)


def _sheet_levels(spec: SymbolSpec, t: float) -> list[float]:
    level = fermi_level(spec)
    if level is None:
        return [float(t)]
    if t < 0:
        raise SurfaceError(f"BCS level sets need t >= 0, got {t}")
    if t == 0:
        return [level]
    return [level + t, level - t]


def _extract_sheet(spec: SymbolSpec, level: float, resolution: int):
    axis, step, periodic = _vertex_axis(spec, level, resolution)
    mesh, values = _sampled_field(spec, axis, step, periodic, level)
    if spec.dimension == 2:
        a, b = _marching_squares(mesh, values)
        a = _newton_project(spec, a, level)
        b = _newton_project(spec, b, level)
        mid = _newton_project(spec, 0.5 * (a + b), level)
        measure = np.linalg.norm(b - a, axis=-1)
    else:
        tris = _marching_tetrahedra(mesh, values)
        flat = _newton_project(spec, tris.reshape(-1, 3), level).reshape(tris.shape)
        mid = _newton_project(spec, flat.mean(axis=1), level)
        measure = 0.5 * np.linalg.norm(np.cross(flat[:, 1] - flat[:, 0], flat[:, 2] - flat[:, 0]), axis=-1)
    keep = measure > 1e-15
    mid, measure = mid[keep], measure[keep]
    grad = np.linalg.norm(base_gradient(spec, mid), axis=-1)
    if periodic:
        mid = np.mod(mid + 0.5, 1.0) - 0.5
    return mid, measure / grad, periodic


def extract_level_set(
    spec: SymbolSpec,
    t: float,
    resolution: int,
    allow_critical: bool = False,
    safe_distance: float = DEFAULT_SAFE_DISTANCE,
) -> SurfaceMesh:
    """S_t as a Leray-weighted point cloud.

    BCS kinds return the union of the sheets P = mu + t and P = mu - t (one
    sheet at t = 0). Plain lattice kinds return the single sheet P = t.
    """
    d = spec.dimension
    if d not in (2, 3):
        raise SurfaceError(f"level sets are extracted for d in {{2, 3}}, got d={d}")
    if resolution < 4:
        raise SurfaceError(f"resolution must be at least 4, got {resolution}")

    sheets = []
    for level in _sheet_levels(spec, t):
        if spec.is_lattice and not -1.0 < level < 1.0:
            continue
        if not spec.is_lattice and level >= 1.0:
            continue
        gap = critical_distance(spec, level)
        if gap <= safe_distance and not allow_critical:
            raise SurfaceError(f"level P={level} lies within {safe_distance:g} of a critical value")
        sheets.append(level)
    if not sheets:
        raise SurfaceError(f"level set t={t} is empty for {spec.kind.value}")

    points, weights, index = [], [], []
    periodic = spec.is_lattice
    for i, level in enumerate(sheets):
        pts, w, periodic = _extract_sheet(spec, level, resolution)
        residual = np.max(np.abs(base_symbol(spec, pts) - level), initial=0.0)
        if residual > LEVEL_TOL:
            raise SurfaceError(f"Newton projection left residual {residual:.3g} on sheet P={level}")
        points.append(pts)
        weights.append(w)
        index.append(np.full(len(w), i))
    points = np.concatenate(points)
    if not len(points):
        raise SurfaceError(f"level set t={t} produced no mesh points at resolution {resolution}")
    logger.debug("level set t=%g: %d points on %d sheet(s)", t, len(points), len(sheets))
    return SurfaceMesh(
        points=points,
        weights=np.concatenate(weights),
        level=float(t),
        sheets=tuple(sheets),
        sheet_index=np.concatenate(index),
        resolution=int(resolution),
        periodic=periodic,
        symbol=spec.descriptor(),
    )


def surface_measure_total(mesh: SurfaceMesh) -> float:
    return math.fsum(mesh.weights.tolist())


def surface_ft(mesh: SurfaceMesh, x):
    """sum_i w_i exp(2 pi i x . xi_i) for one point x or an array of points."""
    xs = np.asarray(x, dtype=float)
    single = xs.ndim == 1
    xs = np.atleast_2d(xs)
    if xs.shape[1] != mesh.dimension:
        raise SurfaceError(f"x has {xs.shape[1]} components, mesh dimension is {mesh.dimension}")
    out = np.empty(len(xs), dtype=complex)
    for start in range(0, len(xs), FT_CHUNK):
        phase = 2.0 * math.pi * xs[start : start + FT_CHUNK] @ mesh.points.T
        out[start : start + FT_CHUNK] = np.exp(1j * phase) @ mesh.weights
    return complex(out[0]) if single else out


def default_directions(d: int) -> np.ndarray:
    """16 angles in d=2; the 26 lattice directions in d=3."""
    if d == 2:
        angles = np.arange(16) * math.pi / 8
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if d == 3:
        dirs = np.array([v for v in itertools.product((-1, 0, 1), repeat=3) if any(v)], dtype=float)
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    raise SurfaceError(f"no default directions for d={d}")


@dataclass(frozen=True)
class DecayFit:
    rate: float
    band: tuple[float, float]
    residual: float
    radii: list[float]
    envelope: list[float]
    guard: float

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "band": list(self.band),
            "residual": self.residual,
            "radii": self.radii,
            "envelope": self.envelope,
            "guard_radius": self.guard,
        }


def nyquist_guard(mesh: SurfaceMesh) -> float:
    """Largest reliable |x|: 1 / (8 * mean nearest-neighbour spacing)."""
    return 1.0 / (8.0 * mesh.mean_spacing())


def decay_rate(mesh: SurfaceMesh, directions=None, radii=None, n_radii: int = 12) -> DecayFit:
    """Fit |FT| ~ |x|^-r using the tail supremum over |x| >= R, maximised over directions."""
    guard = nyquist_guard(mesh)
    dirs = default_directions(mesh.dimension) if directions is None else np.asarray(directions, dtype=float)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    if radii is None:
        radii = np.geomspace(guard / 10.0, guard / 1.5, n_radii)
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii[-1] > guard:
        raise SurfaceError(f"fit radius {radii[-1]:.4g} exceeds the Nyquist guard {guard:.4g}")
    if radii[0] <= 0 or radii.size < 3:
        raise SurfaceError("decay fit needs at least three positive radii")

    extent = float(np.max(np.ptp(mesh.points, axis=0)))
    step = 1.0 / (8.0 * max(extent, 1e-6))
    ray = np.arange(radii[0], guard + step, step)
    envelope = np.zeros(radii.size)
    for direction in dirs:
        values = np.abs(surface_ft(mesh, ray[:, None] * direction[None, :]))
        tail = np.maximum.accumulate(values[::-1])[::-1]
        picks = np.searchsorted(ray, radii, side="left")
        envelope = np.maximum(envelope, tail[np.minimum(picks, ray.size - 1)])
    if np.any(envelope <= 0):
        raise SurfaceError("surface transform vanished inside the fit band")

    log_r, log_env = np.log(radii), np.log(envelope)
    (slope, intercept), cov = np.polyfit(log_r, log_env, 1, cov=True)
    residual = float(np.sqrt(np.mean((log_env - (slope * log_r + intercept)) ** 2)))
    spread = 2.0 * math.sqrt(max(float(cov[0, 0]), 0.0))
    rate = -float(slope)
    logger.info("decay fit: r=%.4f +- %.4f on |x| in [%.3g, %.3g]", rate, spread, radii[0], radii[-1])
    return DecayFit(rate, (rate - spread, rate + spread), residual, radii.tolist(), envelope.tolist(), guard)


def vs_operator(mesh: SurfaceMesh, V: PotentialField, grid: TorusGrid) -> np.ndarray:
    """B = D^1/2 K D^1/2 with K_ij = sum_x V(x) h^d exp(-2 pi i x . (xi_i - xi_j))."""
    if V.values.shape != grid.shape:
        raise SurfaceError("potential does not match the grid")
    if grid.dimension != mesh.dimension:
        raise SurfaceError("grid and mesh dimensions differ")
    support = V.support()
    root_w = np.sqrt(mesh.weights)
    if not support.size:
        return np.zeros((mesh.size, mesh.size), dtype=complex)
    x = positions(grid)[support]
    phases = np.exp(-2j * math.pi * mesh.points @ x.T) * root_w[:, None]
    B = (phases * (V.flat[support] * grid.cell_volume)[None, :]) @ phases.conj().T
    return 0.5 * (B + B.conj().T)


def vs_eigenvalues(B) -> np.ndarray:
    try:
        values = scipy.linalg.eigvalsh(np.asarray(B))
    except scipy.linalg.LinAlgError as exc:
        raise SurfaceError(f"surface operator eigensolve failed: {exc}") from exc
    return values[::-1]

