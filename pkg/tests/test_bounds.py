from __future__ import annotations

import math

import numpy as np
import pytest

from bounds import (
    THEOREM_TAGS,
    BoundParams,
    HypothesisError,
    clr_scaling_study,
    cluster_rate_check,
    growth_exponent,
    map_ordered,
    rhs_structural,
    run_bound_family,
    sublevel_measure,
    weak_coupling_sweep,
)
from spectra import SpectrumResult, negative_eigenvalues
from surface import extract_level_set, surface_measure_total
from symbols import ExponentTable, SymbolKind, SymbolSpec, sigma_exponent_general
from torus import (
    TorusGrid,
    bump_potential,
    delta_potential,
    gaussian_potential,
    plateau_potential,
    random_potential,
    zero_potential,
)

BCS_2D = SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.5)
FRACTIONAL_2D = SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.5, s=2.0)
LATTICE_GRID = TorusGrid(2, 16)
CIRCLE = SymbolSpec(SymbolKind.CONTINUUM_BCS, 2)
CONTINUUM_GRID = TorusGrid(2, 40, 0.15)


def _stress_family(grid: TorusGrid):
    return [
        gaussian_potential(grid, 1.0, 2.0),
        plateau_potential(grid, 1.0, 3.0),
        delta_potential(grid, 1.0),
        random_potential(grid, 1.0, seed=7, radius=4.0),
    ]


def test_rhs_known_values():
    grid = TorusGrid(2, 4)
    unit = delta_potential(grid, 1.0)
    assert rhs_structural("bs-norm-lattice", unit, grid, BoundParams(e=2.0, m=2.0)) == pytest.approx(0.25)
    zero = zero_potential(grid)
    assert rhs_structural("riesz-local", zero, grid, BoundParams(gamma=1.0, s=2.0)) == 0.0
    value = rhs_structural("bs-norm-curved-continuum-q", unit, grid, BoundParams(e=4.0, m=4.0, q=1.0, s=2.0))
    assert value == pytest.approx(1.0)


def test_rhs_theta_switches_at_one():
    grid = TorusGrid(2, 4)
    V = delta_potential(grid, 2.0)
    small = rhs_structural("bs-norm-curved-lattice", V, grid, BoundParams(e=0.5, m=2.0, q=1.5))
    assert small == pytest.approx(math.log(4.0) ** 2 * 2.0**2)
    large = rhs_structural("bs-norm-curved-lattice", V, grid, BoundParams(e=2.0, m=2.0, q=1.5))
    assert large == pytest.approx(2.0**-2 * 4.0)


def test_rhs_uses_positive_part_for_eigenvalue_sums():
    grid = TorusGrid(1, 4)
    V = delta_potential(grid, -3.0)
    assert rhs_structural("riesz-local-lattice", V, grid, BoundParams(gamma=1.0)) == 0.0


@pytest.mark.parametrize(
    "tag,params",
    [
        ("log-moment-lattice", BoundParams(gamma=2.0, m=2.0, q=1.5)),
        ("riesz-curved-lattice", BoundParams(gamma=0.5, m=2.0, q=1.5, delta=1.0)),
        ("riesz-curved-lattice", BoundParams(gamma=4.0, m=2.0, q=1.5, delta=3.0)),
        ("riesz-curved", BoundParams(gamma=0.1, m=2.0, q=1.5, s=2.0)),
        ("bs-norm-continuum", BoundParams(e=0.5, m=0.5, s=2.0)),
        ("clr-lattice", BoundParams(p=3.0, s=2.0)),
        ("riesz-local-lattice", BoundParams()),
        ("no-such-bound", BoundParams()),
    ],
)
def test_rhs_rejects_violated_hypotheses(tag, params):
    grid = TorusGrid(2, 4)
    with pytest.raises(HypothesisError):
        rhs_structural(tag, delta_potential(grid, 1.0), grid, params)


def test_clr_continuum_is_planar():
    grid = TorusGrid(3, 4)
    with pytest.raises(HypothesisError):
        rhs_structural("clr-continuum", delta_potential(grid, 1.0), grid, BoundParams(p=2.0))


def test_growth_exponent():
    assert growth_exponent(SymbolSpec(SymbolKind.CONTINUUM_BCS, 2)) == 2.0
    assert growth_exponent(SymbolSpec(SymbolKind.CONTINUUM_BCS_POWER, 2, s=4.0)) == 0.5
    assert growth_exponent(BCS_2D) is None


def test_zero_family_passes_vacuously():
    report = run_bound_family(
        "riesz-local-lattice", BCS_2D, LATTICE_GRID, [zero_potential(LATTICE_GRID)], BoundParams(gamma=1.0)
    )
    assert report.passed
    assert all(r.lhs == 0 for r in report.records)
    assert report.c_hat == 0.0


def test_family_mode_must_match_symbol():
    with pytest.raises(HypothesisError):
        run_bound_family("riesz-local", BCS_2D, LATTICE_GRID, [zero_potential(LATTICE_GRID)], BoundParams(gamma=1.0))


def test_family_hypotheses_fail_before_solving():
    with pytest.raises(HypothesisError):
        run_bound_family(
            "log-moment-lattice", BCS_2D, LATTICE_GRID, _stress_family(LATTICE_GRID), BoundParams(gamma=1.0, m=2.0, q=1.5)
        )


@pytest.mark.parametrize(
    "tag,params",
    [
        ("riesz-local-lattice", BoundParams(gamma=3.0)),
        ("riesz-curved-lattice", BoundParams(gamma=3.0, m=2.0, q=1.5, delta=1.0)),
        ("log-moment-lattice", BoundParams(gamma=3.0, m=2.0, q=1.5)),
        ("bs-norm-curved-lattice", BoundParams(e=0.05, m=2.0, q=1.5, r=0.5)),
    ],
)
def test_lattice_ratio_stability(tag, params):
    report = run_bound_family(tag, BCS_2D, LATTICE_GRID, _stress_family(LATTICE_GRID), params)
    assert len(report.records) == 12
    assert report.passed, report.to_dict()["spreads"]
    for record in report.records:
        if record.lhs > 0:
            assert math.isfinite(record.ratio) and record.ratio > 0


def _continuum_family(grid: TorusGrid):
    # peak kappa * V stays under the aliasing cutoff T(Nyquist) / 100 ~ 4.37
    return [
        gaussian_potential(grid, 2.0, 1.0),
        bump_potential(grid, 2.0, 1.5),
        plateau_potential(grid, 2.0, 1.5),
        random_potential(grid, 1.0, seed=7, radius=1.5),
    ]


@pytest.mark.parametrize(
    "tag,params",
    [
        ("riesz-local", BoundParams(gamma=2.0)),
        ("riesz-curved", BoundParams(gamma=2.0, m=1.5, q=1.5)),
    ],
)
def test_continuum_riesz_ratio_stability(tag, params):
    kappas = (1.0, 1.5, 2.0)
    report = run_bound_family(tag, CIRCLE, CONTINUUM_GRID, _continuum_family(CONTINUUM_GRID), params, kappas=kappas)
    assert report.params["s"] == 2.0
    assert len(report.records) == 12
    assert report.passed, report.to_dict()["spreads"]
    for name in report.instances():
        lhs = [r.lhs for r in report.records if r.instance == name]
        assert all(b >= a - 1e-12 for a, b in zip(lhs, lhs[1:]))
    assert any(r.lhs > 0 for r in report.records)
    for record in report.records:
        assert record.rhs > 0
        assert math.isfinite(record.ratio)


def test_log_moment_with_curvature_exponent():
    m = sigma_exponent_general(ExponentTable(2, 0.5), 1.5)
    assert m == pytest.approx(3.0)
    report = run_bound_family(
        "log-moment-lattice",
        BCS_2D,
        LATTICE_GRID,
        [gaussian_potential(LATTICE_GRID, 1.0, 2.0)],
        BoundParams(gamma=3.5, m=m, q=1.5),
    )
    assert report.passed


def test_bs_family_attaches_norm_sweeps():
    report = run_bound_family(
        "bs-norm-lattice",
        BCS_2D,
        LATTICE_GRID,
        [gaussian_potential(LATTICE_GRID, 1.0, 2.0)],
        BoundParams(e=0.1, m=2.0),
        e_grid=[2.0**-k for k in range(1, 6)],
    )
    sweep = report.sweeps["00-gaussian"]
    assert sweep["fit_points"] == 3
    assert report.slopes["00-gaussian"] == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("drop_largest,fit_points", [(0, 5), (1, 4), (2, 3)])
def test_bs_sweep_honours_drop_largest(drop_largest, fit_points):
    report = run_bound_family(
        "bs-norm-lattice",
        BCS_2D,
        LATTICE_GRID,
        [gaussian_potential(LATTICE_GRID, 1.0, 2.0)],
        BoundParams(e=0.1, m=2.0),
        e_grid=[2.0**-k for k in range(1, 6)],
        drop_largest=drop_largest,
    )
    sweep = report.sweeps["00-gaussian"]
    assert sweep["fit_points"] == fit_points
    assert len(sweep["log_ratios"]) == fit_points


def test_bs_sweep_rejects_negative_drop():
    with pytest.raises(ValueError, match="drop_largest"):
        run_bound_family(
            "bs-norm-lattice",
            BCS_2D,
            LATTICE_GRID,
            [gaussian_potential(LATTICE_GRID, 1.0, 2.0)],
            BoundParams(e=0.1, m=2.0),
            e_grid=[0.5, 0.25, 0.125],
            drop_largest=-1,
        )


def test_summary_rows_follow_column_order():
    report = run_bound_family(
        "riesz-local-lattice", BCS_2D, LATTICE_GRID, [delta_potential(LATTICE_GRID, 1.0)], BoundParams(gamma=1.0)
    )
    row = report.summary_rows()[0]
    assert row[0] == "riesz-local-lattice"
    assert row[1] == "00-delta@kappa=0.5"
    assert row[6] is report.passed


def test_workers_do_not_change_results():
    family = _stress_family(LATTICE_GRID)[:2]
    serial = run_bound_family("riesz-local-lattice", BCS_2D, LATTICE_GRID, family, BoundParams(gamma=1.0))
    threaded = run_bound_family("riesz-local-lattice", BCS_2D, LATTICE_GRID, family, BoundParams(gamma=1.0), workers=3)
    assert [(r.instance, r.kappa) for r in serial.records] == [(r.instance, r.kappa) for r in threaded.records]
    assert [r.lhs for r in threaded.records] == pytest.approx([r.lhs for r in serial.records], rel=1e-12)


def test_map_ordered_keeps_input_order():
    assert map_ordered(lambda x: x * x, range(10), workers=4) == [x * x for x in range(10)]


def test_cluster_rate_synthetic():
    n = np.arange(1, 21)
    assert cluster_rate_check(SpectrumResult.from_values(np.exp(-n))).slope == pytest.approx(1.0, abs=1e-9)
    n = np.arange(1, 31)
    fit = cluster_rate_check(SpectrumResult.from_values(np.exp(-(n ** (1.0 / 3.0)))), sigma_q=3.0)
    assert fit.slope == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert fit.consistent


def test_cluster_rate_needs_five_points():
    fit = cluster_rate_check(SpectrumResult.from_values([0.5, 0.4, 0.3, 0.2]))
    assert not fit.conclusive
    assert fit.consistent is None


def test_cluster_rate_on_strong_potential():
    result = negative_eigenvalues(BCS_2D, gaussian_potential(LATTICE_GRID, 3.0, 2.0), LATTICE_GRID)
    fit = cluster_rate_check(result, q=1.5, sigma_q=3.0)
    assert fit.conclusive
    assert math.isfinite(fit.slope)
    assert fit.residual < 0.5


def test_weak_coupling_zero_potential_is_inconclusive():
    grid = TorusGrid(2, 8)
    mesh = extract_level_set(BCS_2D, 0.0, 64)
    fit = weak_coupling_sweep(BCS_2D, zero_potential(grid), grid, mesh, [0.05, 0.1, 0.2])
    assert not fit.conclusive
    assert all(values == [] for values in fit.eigenvalues)


def test_weak_coupling_rank_one_law():
    grid = TorusGrid(2, 2048)
    mesh = extract_level_set(BCS_2D, 0.0, 256)
    lambdas = list(np.geomspace(0.21, 0.30, 8))
    fit = weak_coupling_sweep(BCS_2D, delta_potential(grid, 1.0), grid, mesh, lambdas, method="secular")
    tracked = fit.fit_for(1)
    assert tracked.a_surface == pytest.approx(surface_measure_total(mesh), rel=1e-10)
    assert tracked.conclusive
    assert tracked.n_points >= 3
    assert tracked.mismatch_affine <= 0.1

    doubled = weak_coupling_sweep(
        BCS_2D, delta_potential(grid, 2.0), grid, mesh, [lam / 2 for lam in lambdas], method="secular"
    )
    assert doubled.fit_for(1).a_affine == pytest.approx(2.0 * tracked.a_affine, rel=1e-6)


def test_weak_coupling_validation():
    grid = TorusGrid(2, 8)
    mesh = extract_level_set(BCS_2D, 0.0, 64)
    with pytest.raises(ValueError):
        weak_coupling_sweep(BCS_2D, delta_potential(grid, 1.0), grid, mesh, [0.1], method="lanczos")
    with pytest.raises(ValueError):
        weak_coupling_sweep(BCS_2D, delta_potential(grid, 1.0), grid, mesh, [0.0, 0.1])


def test_clr_scaling_lattice():
    study = clr_scaling_study(
        FRACTIONAL_2D, gaussian_potential(LATTICE_GRID, 0.5, 2.0), LATTICE_GRID, p=2.0, alphas=(0.3, 0.15)
    )
    assert study.kappas == [1.0, 2.0, 4.0, 8.0]
    assert study.counts == sorted(study.counts)
    assert study.growth_vs_norm is not None and study.growth_vs_norm <= 1.25
    assert study.within_bound
    assert len(study.halving_factors) == 1
    assert study.halving_factors[0] >= 0.7 * 2**4
    assert study.sublevel_ok


def test_clr_unit_power_comparison():
    study = clr_scaling_study(
        FRACTIONAL_2D,
        gaussian_potential(LATTICE_GRID, 0.5, 2.0),
        LATTICE_GRID,
        p=2.0,
        kappas=(0.25, 1.0),
        alphas=(0.4, 0.2),
        sublevel_resolution=1024,
        compare_unit_power=True,
    )
    assert len(study.unit_power_counts) == 2
    assert study.to_dict()["expected_halving_factor"] == 16.0


def test_clr_rejects_unit_power_and_bad_exponents():
    with pytest.raises(ValueError):
        clr_scaling_study(BCS_2D, zero_potential(LATTICE_GRID), LATTICE_GRID, p=1.0)
    with pytest.raises(HypothesisError):
        clr_scaling_study(FRACTIONAL_2D, zero_potential(LATTICE_GRID), LATTICE_GRID, p=3.0)
    spec = SymbolSpec(SymbolKind.CONTINUUM_BCS_POWER, 3, s=2.0)
    with pytest.raises(HypothesisError):
        clr_scaling_study(spec, zero_potential(TorusGrid(3, 4, 0.1)), TorusGrid(3, 4, 0.1), p=2.0)


def test_continuum_sublevel_annulus():
    spec = SymbolSpec(SymbolKind.CONTINUUM_BCS_POWER, 2, s=2.0)
    alpha = 0.5
    threshold = alpha**4
    assert sublevel_measure(spec, alpha, resolution=2048) == pytest.approx(threshold / (2.0 * math.pi), rel=2e-2)


def test_all_tags_have_a_mode():
    assert {mode for _, mode in THEOREM_TAGS.values()} == {"lattice", "continuum"}
    assert len(THEOREM_TAGS) == 13
