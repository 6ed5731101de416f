from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import strategies as st

from symbols import (
    ExponentDomainError,
    ExponentTable,
    SymbolDomainError,
    SymbolKind,
    SymbolSpec,
    base_symbol,
    critical_values,
    eval_symbol,
    grad_symbol,
    low_energy_window,
    sigma_exponent,
    sigma_exponent_general,
    symbol_diagnostics,
)

STANDARD_2D = SymbolSpec(SymbolKind.LATTICE_STANDARD, 2)
BCS_2D = SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.5)
CIRCLE = SymbolSpec(SymbolKind.CONTINUUM_BCS, 2)


def test_eval_symbol_lattice_values():
    assert eval_symbol(STANDARD_2D, (0.0, 0.0)) == pytest.approx(1.0)
    assert eval_symbol(STANDARD_2D, (0.25, 0.25)) == pytest.approx(0.0, abs=1e-15)
    assert eval_symbol(BCS_2D, (0.0, 0.0)) == pytest.approx(0.5)


def test_eval_symbol_rejects_points_outside_zone():
    with pytest.raises(SymbolDomainError):
        eval_symbol(STANDARD_2D, (0.5, 0.0))
    with pytest.raises(SymbolDomainError):
        eval_symbol(STANDARD_2D, (0.1, 0.1, 0.1))


def test_continuum_symbol_is_not_zone_limited():
    rho = 1.0 / (2.0 * math.pi)
    assert eval_symbol(CIRCLE, (rho, 0.0)) == pytest.approx(0.0, abs=1e-14)
    assert eval_symbol(CIRCLE, (2.0, 0.0)) == pytest.approx(16.0 * math.pi**2 - 1.0)


def test_fractional_power_applies_inverse_s():
    spec = SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.5, s=2.0)
    assert eval_symbol(spec, (0.0, 0.0)) == pytest.approx(math.sqrt(0.5))


def test_grad_symbol_known_values():
    np.testing.assert_allclose(grad_symbol(STANDARD_2D, (0.25, 0.0)), [-math.pi, 0.0], atol=1e-12)
    rho = 0.1
    np.testing.assert_allclose(grad_symbol(CIRCLE, (rho, 0.0)), [-8.0 * math.pi**2 * rho, 0.0], atol=1e-12)


@seed(3)
@given(st.floats(-0.49, 0.49), st.floats(-0.49, 0.49))
def test_mv_gradient_matches_finite_differences(x, y):
    spec = SymbolSpec(SymbolKind.LATTICE_MV, 2)
    step = 1e-6
    grad = grad_symbol(spec, (x, y))
    fd_x = (eval_symbol(spec, (x + step, y)) - eval_symbol(spec, (x - step, y))) / (2 * step)
    fd_y = (eval_symbol(spec, (x, y + step)) - eval_symbol(spec, (x, y - step))) / (2 * step)
    np.testing.assert_allclose(grad, [fd_x, fd_y], atol=1e-6)


@pytest.mark.parametrize(
    "spec",
    [
        STANDARD_2D,
        SymbolSpec(SymbolKind.LATTICE_STANDARD, 3),
        SymbolSpec(SymbolKind.LATTICE_MV, 3),
        BCS_2D,
        SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.3, base="mv"),
        CIRCLE,
        SymbolSpec(SymbolKind.CONTINUUM_BCS_POWER, 2, s=2.0),
    ],
    ids=lambda spec: f"{spec.kind.value}-{spec.base_name}-d{spec.dimension}",
)
def test_gradient_matches_finite_differences_of_base(spec):
    rng = np.random.default_rng(11)
    points = rng.uniform(-0.45, 0.45, size=(25, spec.dimension))
    step = 1e-6
    grad = grad_symbol(spec, points)
    for j in range(spec.dimension):
        shift = np.zeros(spec.dimension)
        shift[j] = step
        fd = (base_symbol(spec, points + shift) - base_symbol(spec, points - shift)) / (2 * step)
        np.testing.assert_allclose(grad[:, j], fd, atol=1e-6)


@pytest.mark.parametrize("kind", [SymbolKind.LATTICE_STANDARD, SymbolKind.LATTICE_MV])
def test_plain_lattice_symbols_span_minus_one_to_one(kind):
    axis = np.arange(-0.5, 0.5, 1.0 / 64)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    values = eval_symbol(SymbolSpec(kind, 2), grid)
    assert values.shape == (64 * 64,)
    assert values.max() == pytest.approx(1.0)
    assert values.min() == pytest.approx(-1.0)
    assert np.all(np.abs(values) <= 1.0 + 1e-15)


def test_critical_values():
    assert critical_values(STANDARD_2D) == pytest.approx([-1.0, 0.0, 1.0])
    assert critical_values(SymbolSpec(SymbolKind.LATTICE_STANDARD, 3)) == pytest.approx([-1.0, -1 / 3, 1 / 3, 1.0])
    assert critical_values(SymbolSpec(SymbolKind.LATTICE_MV, 2)) == pytest.approx([-1.0, 0.0, 1.0])


def test_lattice_bcs_rejects_critical_mu():
    with pytest.raises(SymbolDomainError):
        SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.0)
    with pytest.raises(SymbolDomainError):
        SymbolSpec(SymbolKind.LATTICE_BCS, 3, mu=1.0 / 3.0)


def test_plain_kinds_reject_fractional_power():
    with pytest.raises(SymbolDomainError):
        SymbolSpec(SymbolKind.LATTICE_STANDARD, 2, s=2.0)
    with pytest.raises(SymbolDomainError):
        SymbolSpec(SymbolKind.CONTINUUM_BCS_POWER, 2, s=1.0)


def test_continuum_mu_is_pinned():
    assert SymbolSpec(SymbolKind.CONTINUUM_BCS, 2, mu=0.3).mu == 1.0


def test_low_energy_window_defaults():
    assert low_energy_window(BCS_2D) == pytest.approx(0.25)
    assert low_energy_window(CIRCLE) == pytest.approx(0.5)
    assert low_energy_window(STANDARD_2D) is None
    assert low_energy_window(SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.5, tau=0.1)) == pytest.approx(0.1)


def test_sigma_exponent_known_values():
    assert sigma_exponent(ExponentTable(3, 1.0), 1.0) == 1.0
    assert sigma_exponent(ExponentTable(3, 1.0), 2.0) == 4.0
    assert sigma_exponent(ExponentTable(2, 0.5), 1.2) == pytest.approx(1.5)


def test_sigma_exponent_range():
    with pytest.raises(ExponentDomainError):
        sigma_exponent(ExponentTable(3, 1.0), 3.0)
    with pytest.raises(ExponentDomainError):
        sigma_exponent(ExponentTable(3, 1.0), 0.5)


def test_sigma_exponent_general_known_values():
    assert sigma_exponent_general(ExponentTable(3, 0.75), 4.0 / 3.0) == pytest.approx(2.0)
    assert sigma_exponent_general(ExponentTable(3, 1.0), 2.0) == pytest.approx(4.0)
    assert sigma_exponent_general(ExponentTable(2, 0.5, epsilon=0.0), 1.0) == pytest.approx(1.0)
    assert sigma_exponent_general(ExponentTable(2, 0.5), 1.5) == pytest.approx(3.0)


@seed(5)
@given(st.integers(2, 5), st.floats(0.02, 1.0), st.floats(0.0, 1.0))
def test_general_exponent_dominates_q_up_to_half_codimension(d, r_fraction, q_fraction):
    r = r_fraction * (d - 1) / 2.0
    q = 1.0 + q_fraction * r
    for epsilon in (0.0, 1e-2):
        assert sigma_exponent_general(ExponentTable(d, r, epsilon=epsilon), q) >= q - 1e-12


def test_sigma_exponent_general_rejects_q_above_one_plus_r():
    with pytest.raises(ExponentDomainError):
        sigma_exponent_general(ExponentTable(2, 0.5), 1.6)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_general_exponent_reduces_to_sigma_at_half_codimension(d):
    r = (d - 1) / 2.0
    table = ExponentTable(d, r, epsilon=0.0)
    for q in np.linspace(1.0, 1.0 + r, 50):
        if q >= d:
            continue
        assert sigma_exponent_general(table, q) == pytest.approx(sigma_exponent(table, q), abs=1e-12)


def test_exponent_table_validation():
    with pytest.raises(ExponentDomainError):
        ExponentTable(2, 2.0)
    with pytest.raises(ExponentDomainError):
        ExponentTable(2, 0.5, epsilon=-1.0)


def test_symbol_diagnostics_reports_gradient_floor():
    diag = symbol_diagnostics(BCS_2D)
    assert diag["tau"] == pytest.approx(0.25)
    assert diag["c_P"] > 0
    assert diag["growth_exponent"] is None


def test_symbol_diagnostics_continuum_growth():
    diag = symbol_diagnostics(SymbolSpec(SymbolKind.CONTINUUM_BCS_POWER, 2, s=2.0))
    assert diag["growth_exponent"] == pytest.approx(1.0)
    assert diag["C1"] > 0
