"""LHS/RHS evaluation of the eigenvalue bounds over stress families, weak-coupling sweeps and CLR studies."""

from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from schatten import (
    DEFAULT_DROP_LARGEST,
    BSNormSweep,
    birman_schwinger,
    bs_norm_sweep,
    schatten_norm_power,
    secular_negative_eigenvalues,
    singular_values,
)
from spectra import SpectrumResult, count_below, fit_line, log_moment, negative_eigenvalues, riesz_mean
from surface import SurfaceMesh, vs_eigenvalues, vs_operator
from symbols import CONTINUUM_KINDS, SymbolKind, SymbolSpec, base_symbol, fermi_level, low_energy_window
from torus import (
    DEFAULT_ALIASING_FACTOR,
    DEFAULT_DENSE_CAP,
    PotentialField,
    TorusGrid,
    check_frequency_cutoff,
    lq_norm,
    lq_norm_power,
    spectral_resolution,
)

logger = logging.getLogger(__name__)

DEFAULT_KAPPAS = (0.5, 1.0, 2.0)
DEFAULT_RATIO_FACTOR = 10.0
EIGEN_FLOOR = 1e-12

# tag -> (left-hand functional, mode)
THEOREM_TAGS: dict[str, tuple[str, str]] = {
    "bs-norm-continuum": ("bs", "continuum"),
    "bs-norm-curved-continuum": ("bs", "continuum"),
    "bs-norm-curved-continuum-q": ("bs", "continuum"),
    "riesz-local": ("riesz", "continuum"),
    "riesz-curved": ("riesz", "continuum"),
    "log-moment-continuum": ("log", "continuum"),
    "clr-continuum": ("clr", "continuum"),
    "bs-norm-lattice": ("bs", "lattice"),
    "bs-norm-curved-lattice": ("bs", "lattice"),
    "riesz-local-lattice": ("riesz", "lattice"),
    "riesz-curved-lattice": ("riesz", "lattice"),
    "log-moment-lattice": ("log", "lattice"),
    "clr-lattice": ("clr", "lattice"),
}


class HypothesisError(ValueError):
    """Raised when bound parameters violate the hypotheses of the tagged estimate."""


@dataclass(frozen=True)
class BoundParams:
    e: float | None = None
    gamma: float | None = None
    m: float | None = None
    q: float | None = None
    r: float | None = None
    delta: float | None = None
    s: float | None = None
    p: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def growth_exponent(spec: SymbolSpec) -> float | None:
    """Ellipticity exponent of T at infinity: |1 - 4 pi^2 xi^2|^(1/s) grows like |xi|^(2/s)."""
    if spec.kind in CONTINUUM_KINDS:
        return 2.0 / spec.s
    return None


def _theta(x: float) -> float:
    return 1.0 if x >= 0 else 0.0


def _need(params: BoundParams, tag: str, *names: str) -> list[float]:
    values = []
    for name in names:
        value = getattr(params, name)
        if value is None:
            raise HypothesisError(f"{tag} needs parameter {name!r}")
        values.append(float(value))
    return values


def _require(condition: bool, tag: str, message: str) -> None:
    if not condition:
        raise HypothesisError(f"{tag}: {message}")


def rhs_structural(tag: str, V: PotentialField, grid: TorusGrid, params: BoundParams) -> float:
    """Right-hand functional of the tagged estimate with unit constant."""
    if tag not in THEOREM_TAGS:
        raise HypothesisError(f"unknown theorem tag {tag!r}; expected one of {sorted(THEOREM_TAGS)}")
    d = grid.dimension
    Vp = V.positive_part()

    def norm_pow(field_: PotentialField, q: float, power: float) -> float:
        return lq_norm(field_, q, grid) ** power

    if tag == "bs-norm-continuum":
        e, m, s = _need(params, tag, "e", "m", "s")
        _require(e > 0, tag, "e must be positive")
        _require(m > d / s, tag, f"needs m > d/s = {d / s}")
        return (e ** (1 - m) * _theta(1 - e) + e ** (d / s - m) * _theta(e - 1)) * lq_norm_power(V, m, grid)

    if tag == "bs-norm-curved-continuum":
        e, m, q, s = _need(params, tag, "e", "m", "q", "s")
        _require(e > 0, tag, "e must be positive")
        _require(q >= 1, tag, "needs q >= 1")
        _require(m > d / s, tag, f"needs m > d/s = {d / s}")
        if params.r is not None:
            _require(q <= 1 + params.r, tag, f"needs q <= 1 + r = {1 + params.r}")
        vm, vq = lq_norm(V, m, grid), lq_norm(V, q, grid)
        small = vm**m + math.log(2 + 1 / e) ** m * vq**m
        large = e ** (d / s - m) * vm**m + e ** (-m) * min(vm, vq) ** m
        return small * _theta(1 - e) + large * _theta(e - 1)

    if tag == "bs-norm-curved-continuum-q":
        e, m, q, s = _need(params, tag, "e", "m", "q", "s")
        _require(e > 0, tag, "e must be positive")
        _require(q >= d / s, tag, f"needs q >= d/s = {d / s}")
        factor = math.log(2 + 1 / e) ** m * _theta(1 - e) + e ** (m * d / (s * q) - m) * _theta(e - 1)
        return norm_pow(V, q, m) * factor

    if tag == "riesz-local":
        gamma, s = _need(params, tag, "gamma", "s")
        _require(gamma > 0 and gamma > d / s - 1, tag, f"needs gamma > max(0, d/s - 1) = {max(0, d / s - 1)}")
        return lq_norm_power(Vp, gamma + 1, grid) + lq_norm_power(Vp, gamma + d / s, grid)

    if tag == "riesz-curved":
        gamma, m, q, s = _need(params, tag, "gamma", "m", "q", "s")
        _require(m > d / s, tag, f"needs m > d/s = {d / s}")
        _require(gamma > m - d / s, tag, f"needs gamma > m - d/s = {m - d / s}")
        return norm_pow(Vp, q, m) + lq_norm_power(Vp, gamma + d / s, grid)

    if tag == "log-moment-continuum":
        gamma, m, q, s = _need(params, tag, "gamma", "m", "q", "s")
        _require(gamma > m, tag, "needs gamma > m")
        _require(m > d / s, tag, f"needs m > d/s = {d / s}")
        return lq_norm_power(Vp, m, grid) + norm_pow(Vp, q, m)

    if tag == "clr-continuum":
        (p,) = _need(params, tag, "p")
        _require(d == 2, tag, "stated for d = 2")
        _require(p > 1, tag, "needs p > 1")
        return lq_norm_power(Vp, p, grid)

    if tag == "bs-norm-lattice":
        e, m = _need(params, tag, "e", "m")
        _require(e > 0, tag, "e must be positive")
        _require(m >= 1, tag, "needs m >= 1")
        return min(e ** (1 - m), e ** (-m)) * lq_norm_power(V, m, grid)

    if tag == "bs-norm-curved-lattice":
        e, m, q = _need(params, tag, "e", "m", "q")
        _require(e > 0, tag, "e must be positive")
        _require(m >= 1 and q >= 1, tag, "needs m >= 1 and q >= 1")
        if params.r is not None:
            _require(q <= 1 + params.r, tag, f"needs q <= 1 + r = {1 + params.r}")
        return math.log(2 + 1 / e) ** m * norm_pow(V, q, m) * _theta(1 - e) + e ** (-m) * lq_norm_power(
            V, m, grid
        ) * _theta(e - 1)

    if tag == "riesz-local-lattice":
        (gamma,) = _need(params, tag, "gamma")
        _require(gamma > 0, tag, "needs gamma > 0")
        return lq_norm_power(Vp, gamma + 1, grid)

    if tag == "riesz-curved-lattice":
        gamma, m, q, delta = _need(params, tag, "gamma", "m", "q", "delta")
        _require(0 <= delta <= m, tag, "needs delta in [0, m]")
        _require(gamma > delta, tag, "needs gamma > delta")
        return norm_pow(Vp, q, m) + lq_norm_power(Vp, m + gamma - delta, grid)

    if tag == "log-moment-lattice":
        gamma, m, q = _need(params, tag, "gamma", "m", "q")
        _require(gamma > m, tag, "needs gamma > m")
        return norm_pow(Vp, q, m)

    # clr-lattice
    p, s = _need(params, tag, "p", "s")
    _require(1 < p <= s, tag, f"needs p in (1, s] = (1, {s}]")
    return lq_norm_power(Vp, p, grid)


def bound_lhs(
    tag: str,
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    params: BoundParams,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> float:
    kind, _ = THEOREM_TAGS[tag]
    if kind == "bs":
        e, m = _need(params, tag, "e", "m")
        return schatten_norm_power(singular_values(birman_schwinger(spec, V, grid, e, dense_cap)), m)
    result = negative_eigenvalues(spec, V, grid, dense_cap)
    if kind == "riesz":
        return riesz_mean(result, _need(params, tag, "gamma")[0])
    if kind == "log":
        return log_moment(result, _need(params, tag, "gamma")[0])
    return float(count_below(result, 0.0))


def map_ordered(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """Evaluate fn over items, returning results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _resolve_params(spec: SymbolSpec, params: BoundParams, tag: str) -> BoundParams:
    updates = {}
    if params.s is None:
        if spec.kind in CONTINUUM_KINDS:
            updates["s"] = growth_exponent(spec)
        elif tag == "clr-lattice":
            updates["s"] = spec.s
    if not updates:
        return params
    return BoundParams(**{**asdict(params), **updates})


@dataclass(frozen=True)
class BoundRecord:
    instance: str
    kappa: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf

    def to_dict(self) -> dict:
        return {"instance": self.instance, "kappa": self.kappa, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}


@dataclass
class BoundReport:
    tag: str
    params: dict
    family: list[dict]
    records: list[BoundRecord]
    ratio_factor: float
    slopes: dict[str, float | None] = field(default_factory=dict)
    sweeps: dict[str, dict] = field(default_factory=dict)

    def instances(self) -> list[str]:
        return sorted({r.instance for r in self.records})

    def spread(self, instance: str) -> float:
        """max / median of the positive ratios of one instance across its kappa sweep."""
        ratios = [r.ratio for r in self.records if r.instance == instance and r.lhs > 0]
        if any(math.isinf(x) for x in ratios):
            return math.inf
        if not ratios:
            return 1.0
        return max(ratios) / statistics.median(ratios)

    @property
    def c_hat(self) -> float:
        finite = [r.ratio for r in self.records if math.isfinite(r.ratio)]
        return max(finite, default=0.0)

    @property
    def passed(self) -> bool:
        return all(self.spread(name) <= self.ratio_factor for name in self.instances())

    def to_dict(self) -> dict:
        return {
            "theorem": self.tag,
            "params": self.params,
            "family": self.family,
            "records": [r.to_dict() for r in self.records],
            "c_hat": self.c_hat,
            "spreads": {name: self.spread(name) for name in self.instances()},
            "slopes": self.slopes,
            "sweeps": self.sweeps,
            "ratio_factor": self.ratio_factor,
            "pass": self.passed,
        }

    def summary_rows(self) -> list[list]:
        return [
            [self.tag, f"{r.instance}@kappa={r.kappa:g}", r.lhs, r.rhs, r.ratio, self.slopes.get(r.instance), self.passed]
            for r in self.records
        ]


def _instance_name(index: int, V: PotentialField) -> str:
    return f"{index:02d}-{V.family}"


def run_bound_family(
    tag: str,
    spec: SymbolSpec,
    grid: TorusGrid,
    family: Sequence[PotentialField],
    params: BoundParams,
    kappas: Sequence[float] = DEFAULT_KAPPAS,
    ratio_factor: float = DEFAULT_RATIO_FACTOR,
    e_grid: Sequence[float] | None = None,
    workers: int = 1,
    dense_cap: int = DEFAULT_DENSE_CAP,
    aliasing_factor: float = DEFAULT_ALIASING_FACTOR,
    drop_largest: int = DEFAULT_DROP_LARGEST,
) -> BoundReport:
    """Evaluate LHS and RHS over family x kappa; pass when every instance's ratio spread stays within ratio_factor.

    For bs tags with an e_grid, each instance also gets an e-sweep of the norm with the
    drop_largest largest-e points left out of the slope fit.
    """
    if tag not in THEOREM_TAGS:
        raise HypothesisError(f"unknown theorem tag {tag!r}")
    if not family:
        raise ValueError("a bound family needs at least one potential")
    kind, mode = THEOREM_TAGS[tag]
    if (mode == "lattice") != spec.is_lattice:
        raise HypothesisError(f"{tag} is a {mode} estimate but the symbol is {spec.kind.value}")
    params = _resolve_params(spec, params, tag)

    tasks = []
    for index, V in enumerate(family):
        for kappa in kappas:
            scaled = V.scaled(kappa)
            check_frequency_cutoff(spec, scaled, grid, aliasing_factor)
            tasks.append((_instance_name(index, V), float(kappa), scaled))
    # fail on bad hypotheses before any eigensolve
    for _, _, scaled in tasks:
        rhs_structural(tag, scaled, grid, params)

    def evaluate(task) -> BoundRecord:
        name, kappa, scaled = task
        return BoundRecord(name, kappa, bound_lhs(tag, spec, scaled, grid, params, dense_cap), rhs_structural(tag, scaled, grid, params))

    records = map_ordered(evaluate, tasks, workers)
    records.sort(key=lambda r: (r.instance, r.kappa))

    slopes: dict[str, float | None] = {}
    for index, V in enumerate(family):
        name = _instance_name(index, V)
        pts = [(r.kappa, r.lhs) for r in records if r.instance == name and r.lhs > 0]
        slopes[name] = fit_line(np.log([k for k, _ in pts]), np.log([v for _, v in pts]))[0] if len(pts) >= 2 else None

    sweeps: dict[str, dict] = {}
    if kind == "bs" and e_grid:
        m = _need(params, tag, "m")[0]
        for index, V in enumerate(family):
            sweep: BSNormSweep = bs_norm_sweep(
                spec, V, grid, e_grid, m, drop_largest=drop_largest, dense_cap=dense_cap
            )
            sweeps[_instance_name(index, V)] = sweep.to_dict()

    report = BoundReport(tag, params.to_dict(), [V.descriptor() for V in family], records, ratio_factor, slopes, sweeps)
    logger.info("%s: c_hat=%.4g pass=%s over %d records", tag, report.c_hat, report.passed, len(records))
    return report


@dataclass(frozen=True)
class ClusterFit:
    slope: float | None
    residual: float | None
    n_used: int
    predicted_min: float | None
    norm_q: float | None
    tolerance: float

    @property
    def conclusive(self) -> bool:
        return self.slope is not None

    @property
    def consistent(self) -> bool | None:
        if self.slope is None or self.predicted_min is None:
            return None
        return self.slope >= self.predicted_min - self.tolerance

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "residual": self.residual,
            "n_used": self.n_used,
            "predicted_min": self.predicted_min,
            "norm_q": self.norm_q,
            "conclusive": self.conclusive,
            "consistent": self.consistent,
        }


def cluster_rate_check(
    result: SpectrumResult,
    q: float | None = None,
    sigma_q: float | None = None,
    norm_q: float | None = None,
    min_points: int = 5,
    tolerance: float = 0.1,
) -> ClusterFit:
    """Fit log log(1/e_n) against log n over the eigenvalues in (0, 1).

    Clustering e_n <= exp(-c n^(1/sigma(q))) predicts a slope of at least 1/sigma(q).
    """
    e = result.negative_eigenvalues
    n = np.arange(1, e.size + 1, dtype=float)
    inside = (e > 0) & (e < 1)
    predicted = None if sigma_q is None else 1.0 / sigma_q
    if np.count_nonzero(inside) < min_points:
        logger.info("cluster check inconclusive: %d eigenvalues in (0, 1)", np.count_nonzero(inside))
        return ClusterFit(None, None, int(np.count_nonzero(inside)), predicted, norm_q, tolerance)
    slope, _, residual = fit_line(np.log(n[inside]), np.log(np.log(1.0 / e[inside])))
    return ClusterFit(slope, residual, int(np.count_nonzero(inside)), predicted, norm_q, tolerance)


def _origin_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    a = float(np.dot(x, y) / np.dot(x, x))
    rel = float(np.sqrt(np.mean((y - a * x) ** 2)) / np.sqrt(np.mean(y**2)))
    return a, rel


@dataclass(frozen=True)
class TrackedFit:
    j: int
    a_surface: float | None
    a_fit: float | None
    a_affine: float | None
    window: tuple[float, float] | None
    n_points: int

    @staticmethod
    def _mismatch(a: float | None, ref: float | None) -> float | None:
        if a is None or ref is None or ref <= 0:
            return None
        return abs(a - ref) / ref

    @property
    def mismatch(self) -> float | None:
        return self._mismatch(self.a_fit, self.a_surface)

    @property
    def mismatch_affine(self) -> float | None:
        return self._mismatch(self.a_affine, self.a_surface)

    @property
    def conclusive(self) -> bool:
        return self.a_fit is not None and self.a_surface is not None

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "a_surface": self.a_surface,
            "a_fit": self.a_fit,
            "a_affine": self.a_affine,
            "mismatch": self.mismatch,
            "mismatch_affine": self.mismatch_affine,
            "window": None if self.window is None else list(self.window),
            "n_points": self.n_points,
            "conclusive": self.conclusive,
        }


@dataclass(frozen=True)
class WeakCouplingFit:
    lambdas: list[float]
    eigenvalues: list[list[float]]
    surface_eigenvalues: list[float]
    fits: list[TrackedFit]
    method: str
    floor: float
    resolution: float

    @property
    def conclusive(self) -> bool:
        return any(f.conclusive for f in self.fits)

    def fit_for(self, j: int) -> TrackedFit:
        return next(f for f in self.fits if f.j == j)

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas,
            "eigenvalues": self.eigenvalues,
            "surface_eigenvalues": self.surface_eigenvalues,
            "fits": [f.to_dict() for f in self.fits],
            "method": self.method,
            "floor": self.floor,
            "spectral_resolution": self.resolution,
            "conclusive": self.conclusive,
        }


def weak_coupling_sweep(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    mesh: SurfaceMesh,
    lambdas: Sequence[float],
    tracked: Sequence[int] = (1,),
    method: str = "dense",
    floor: float = EIGEN_FLOOR,
    window_factor: float = 0.1,
    resolution_factor: float = 10.0,
    dense_cap: int = DEFAULT_DENSE_CAP,
    workers: int = 1,
) -> WeakCouplingFit:
    """Fit e_j(lambda) = exp(-1 / (2 lambda a_j)) against the surface-operator eigenvalues a_j.

    The through-origin fit of 1/(-2 log e_j) on lambda drops the largest lambda
    while that improves the relative residual by more than 10%. The affine fit of
    -2 log e_j on 1/lambda absorbs a constant-order correction.
    """
    if method not in ("dense", "secular"):
        raise ValueError(f"method must be 'dense' or 'secular', got {method!r}")
    lambdas = sorted(float(x) for x in lambdas)
    if not lambdas or lambdas[0] <= 0:
        raise ValueError("lambda grid must be non-empty and positive")

    surface = vs_eigenvalues(vs_operator(mesh, V, grid)).real
    positive = [float(a) for a in surface if a > 1e-14]

    def solve(lam: float) -> SpectrumResult:
        scaled = V.scaled(lam)
        if method == "secular":
            return secular_negative_eigenvalues(spec, scaled, grid, floor=floor)
        return negative_eigenvalues(spec, scaled, grid, dense_cap)

    spectra = map_ordered(solve, lambdas, workers)
    resolution = spectral_resolution(spec, grid)
    tau = low_energy_window(spec)
    upper = window_factor * tau if tau is not None else math.inf
    lower = max(floor, resolution_factor * resolution)

    fits = []
    for j in tracked:
        if j < 1:
            raise ValueError(f"tracked indices are 1-based, got {j}")
        points = [
            (lam, float(res.negative_eigenvalues[j - 1]))
            for lam, res in zip(lambdas, spectra)
            if res.count >= j and lower <= res.negative_eigenvalues[j - 1] <= upper
        ]
        a_surface = positive[j - 1] if len(positive) >= j else None
        if not points:
            fits.append(TrackedFit(j, a_surface, None, None, None, 0))
            continue
        x = np.array([lam for lam, _ in points])
        logs = -2.0 * np.log(np.array([e for _, e in points]))
        y = 1.0 / logs
        keep = len(points)
        a_fit, rel = _origin_fit(x, y)
        while keep > 3:
            a_try, rel_try = _origin_fit(x[: keep - 1], y[: keep - 1])
            if rel_try >= 0.9 * rel:
                break
            keep, a_fit, rel = keep - 1, a_try, rel_try
        a_affine = None
        if keep >= 3:
            slope, _, _ = fit_line(1.0 / x[:keep], logs[:keep])
            a_affine = 1.0 / slope if slope > 0 else None
        fits.append(TrackedFit(j, a_surface, a_fit, a_affine, (float(x[0]), float(x[keep - 1])), keep))
        logger.info("weak coupling j=%d: a_fit=%.5g a_affine=%s a_S=%s", j, a_fit, a_affine, a_surface)

    n_keep = max(tracked) if tracked else 0
    eigenvalues = [res.negative_eigenvalues[:n_keep].tolist() for res in spectra]
    return WeakCouplingFit(lambdas, eigenvalues, positive[: max(n_keep, 1)], fits, method, floor, resolution)


def sublevel_measure(spec: SymbolSpec, alpha: float, resolution: int = 4096, chunk_rows: int = 256) -> float:
    """|{xi : |P(xi) - mu| <= alpha^(2s)}| by midpoint counting on a uniform frequency grid."""
    level = fermi_level(spec)
    if level is None:
        raise ValueError("sub-level sets are defined for BCS symbols")
    threshold = alpha ** (2.0 * spec.s)
    d = spec.dimension
    if spec.is_lattice:
        lo, hi = -0.5, 0.5
    else:
        hi = math.sqrt(1.0 + threshold) / (2.0 * math.pi) * 1.05
        lo = -hi
    step = (hi - lo) / resolution
    axis = lo + (np.arange(resolution) + 0.5) * step
    rest = np.stack(np.meshgrid(*([axis] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1) if d > 1 else None
    hits = 0
    for start in range(0, resolution, chunk_rows):
        first = axis[start : start + chunk_rows]
        if rest is None:
            pts = first[:, None]
        else:
            pts = np.concatenate(
                [np.repeat(first, len(rest))[:, None], np.tile(rest, (len(first), 1))], axis=1
            )
        hits += int(np.count_nonzero(np.abs(base_symbol(spec, pts) - level) <= threshold))
    return hits * step**d


@dataclass(frozen=True)
class CLRStudy:
    kappas: list[float]
    counts: list[int]
    norms: list[float]
    p: float
    s: float
    growth_vs_kappa: float | None
    growth_vs_norm: float | None
    alphas: list[float]
    sublevel: list[float]
    halving_factors: list[float]
    unit_power_counts: list[int] | None = None

    @property
    def within_bound(self) -> bool:
        ok_kappa = self.growth_vs_kappa is None or self.growth_vs_kappa <= self.p + 0.25
        ok_norm = self.growth_vs_norm is None or self.growth_vs_norm <= 1.25
        return ok_kappa and ok_norm

    @property
    def sublevel_ok(self) -> bool:
        return all(f >= 0.7 * 2 ** (2 * self.s) for f in self.halving_factors)

    def to_dict(self) -> dict:
        return {
            "kappas": self.kappas,
            "counts": self.counts,
            "norms": self.norms,
            "count_to_norm": [c / n if n > 0 else None for c, n in zip(self.counts, self.norms)],
            "p": self.p,
            "s": self.s,
            "growth_vs_kappa": self.growth_vs_kappa,
            "growth_vs_norm": self.growth_vs_norm,
            "within_bound": self.within_bound,
            "alphas": self.alphas,
            "sublevel": self.sublevel,
            "halving_factors": self.halving_factors,
            "expected_halving_factor": 2 ** (2 * self.s),
            "sublevel_ok": self.sublevel_ok,
            "unit_power_counts": self.unit_power_counts,
        }


def _unit_power(spec: SymbolSpec) -> SymbolSpec:
    kind = SymbolKind.CONTINUUM_BCS if spec.kind == SymbolKind.CONTINUUM_BCS_POWER else spec.kind
    return SymbolSpec(kind, spec.dimension, spec.mu, 1.0, spec.base, spec.tau)


def clr_scaling_study(
    spec: SymbolSpec,
    V: PotentialField,
    grid: TorusGrid,
    p: float,
    kappas: Sequence[float] = (1.0, 2.0, 4.0, 8.0),
    alphas: Sequence[float] = (0.3, 0.15),
    sublevel_resolution: int = 4096,
    compare_unit_power: bool = False,
    workers: int = 1,
    dense_cap: int = DEFAULT_DENSE_CAP,
    aliasing_factor: float = DEFAULT_ALIASING_FACTOR,
) -> CLRStudy:
    """N_0(kappa V) against ||(kappa V)_+||_p^p for a fractional BCS symbol, plus sub-level measures."""
    if not spec.is_bcs or spec.s <= 1:
        raise ValueError(f"CLR scaling needs a fractional BCS symbol with s > 1, got s={spec.s}")
    if not 1 < p <= spec.s:
        raise HypothesisError(f"CLR exponent p must lie in (1, s] = (1, {spec.s}], got {p}")
    if not spec.is_lattice and spec.dimension != 2:
        raise HypothesisError("the continuum CLR estimate is stated for d = 2")
    kappas = [float(k) for k in kappas]
    scaled = [V.scaled(k) for k in kappas]
    for field_ in scaled:
        check_frequency_cutoff(spec, field_, grid, aliasing_factor)

    def count(args) -> int:
        symbol, field_ = args
        return count_below(negative_eigenvalues(symbol, field_, grid, dense_cap), 0.0)

    counts = map_ordered(count, [(spec, f) for f in scaled], workers)
    norms = [lq_norm_power(f.positive_part(), p, grid) for f in scaled]
    pts = [(k, c, n) for k, c, n in zip(kappas, counts, norms) if c > 0 and n > 0]
    growth_kappa = growth_norm = None
    if len(pts) >= 2:
        growth_kappa = fit_line(np.log([k for k, _, _ in pts]), np.log([c for _, c, _ in pts]))[0]
        growth_norm = fit_line(np.log([n for _, _, n in pts]), np.log([c for _, c, _ in pts]))[0]

    unit_counts = None
    if compare_unit_power:
        unit = _unit_power(spec)
        unit_counts = map_ordered(count, [(unit, f) for f in scaled], workers)

    alphas = sorted((float(a) for a in alphas), reverse=True)
    resolution = sublevel_resolution if spec.dimension < 3 else min(sublevel_resolution, 256)
    measures = [sublevel_measure(spec, a, resolution) for a in alphas]
    by_alpha = dict(zip(alphas, measures))
    factors = []
    for a in alphas:
        half = next((b for b in alphas if math.isclose(b, a / 2.0, rel_tol=1e-9)), None)
        if half is not None and by_alpha[half] > 0:
            factors.append(by_alpha[a] / by_alpha[half])
    logger.info("CLR study: counts=%s growth(kappa)=%s factors=%s", counts, growth_kappa, factors)
    return CLRStudy(
        kappas,
        [int(c) for c in counts],
        norms,
        float(p),
        spec.s,
        growth_kappa,
        growth_norm,
        alphas,
        measures,
        factors,
        None if unit_counts is None else [int(c) for c in unit_counts],
    )
