from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from schatten import (
    SingularSpectrum,
    alt_trace_check,
    birman_schwinger,
    birman_schwinger_on_support,
    bs_norm_sweep,
    counting_n,
    schatten_norm,
    schatten_norm_power,
    secular_negative_eigenvalues,
    singular_values,
    verify_bs_principle,
    weak_schatten_norm,
)
from spectra import negative_eigenvalues
from symbols import SymbolKind, SymbolSpec
from torus import (
    DenseCapError,
    TorusGrid,
    delta_potential,
    gaussian_potential,
    plateau_potential,
    random_potential,
    zero_potential,
)

BCS_2D = SymbolSpec(SymbolKind.LATTICE_BCS, 2, mu=0.5)
UNIT_1D = SymbolSpec(SymbolKind.LATTICE_STANDARD, 1)


def _random_psd(rng: np.random.Generator, n: int = 6) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return g @ g.conj().T


def test_birman_schwinger_trivial_cases():
    grid = TorusGrid(2, 8)
    assert np.all(birman_schwinger(BCS_2D, zero_potential(grid), grid, 0.1) == 0)
    single = TorusGrid(1, 1)
    np.testing.assert_allclose(birman_schwinger(UNIT_1D, delta_potential(single, 3.0), single, 0.5), [[3.0 / 1.5]])
    with pytest.raises(ValueError):
        birman_schwinger(BCS_2D, zero_potential(grid), grid, 0.0)


def test_birman_schwinger_respects_dense_cap():
    grid = TorusGrid(2, 16)
    with pytest.raises(DenseCapError):
        birman_schwinger(BCS_2D, zero_potential(grid), grid, 0.1, dense_cap=64)


def test_support_compression_keeps_nonzero_spectrum():
    grid = TorusGrid(2, 12)
    V = plateau_potential(grid, 1.0, 2.0)
    full = singular_values(birman_schwinger(BCS_2D, V, grid, 0.05))
    support, block = birman_schwinger_on_support(BCS_2D, V, grid, 0.05)
    compressed = singular_values(block)
    assert block.shape == (support.size, support.size)
    np.testing.assert_allclose(compressed.svals, full.svals[: support.size], atol=1e-10)
    assert np.all(full.svals[support.size :] < 1e-10)


def test_singular_values_known_values():
    np.testing.assert_allclose(singular_values(np.diag([3.0, -2.0])).svals, [3.0, 2.0])
    np.testing.assert_allclose(singular_values(np.zeros((3, 3))).svals, [0.0, 0.0, 0.0])


def test_schatten_norm_known_values():
    assert schatten_norm(SingularSpectrum(np.array([3.0, 4.0])), 2.0) == pytest.approx(5.0)
    assert schatten_norm(SingularSpectrum(np.array([1.0])), 3.7) == pytest.approx(1.0)
    assert schatten_norm(SingularSpectrum(np.array([1.0, 0.5, 0.25])), 1.0) == pytest.approx(1.75)
    assert schatten_norm_power(SingularSpectrum(np.array([3.0, 4.0])), 2.0) == pytest.approx(25.0)


def test_weak_schatten_norm_known_values():
    assert weak_schatten_norm(SingularSpectrum(np.array([1.0, 1 / 2, 1 / 3])), 1.0) == pytest.approx(1.0)
    assert weak_schatten_norm(SingularSpectrum(np.array([5.0])), 2.0) == pytest.approx(5.0)
    assert weak_schatten_norm(SingularSpectrum(np.array([3.0, 3.0, 1.0])), 1.0) == pytest.approx(6.0)


def test_counting_n_is_strict():
    spectrum = SingularSpectrum(np.array([3.0, 2.0, 1.0]))
    assert counting_n(spectrum, 1.5) == 2
    assert counting_n(spectrum, 3.0) == 0


@seed(7)
@given(
    arrays(np.float64, (12,), elements=st.floats(min_value=0.0, max_value=10.0)),
    st.sampled_from([1.0, 2.0, 3.0]),
)
def test_weak_schatten_inequalities(values, p):
    spectrum = SingularSpectrum(values)
    weak = weak_schatten_norm(spectrum, p)
    m = np.arange(1, values.size + 1)
    assert np.all(spectrum.svals <= weak * m ** (-1.0 / p) * (1 + 1e-12) + 1e-300)
    assert weak <= schatten_norm(spectrum, p) * (1 + 1e-12) + 1e-300


def test_counting_identity_single_site():
    grid = TorusGrid(1, 1)
    check = verify_bs_principle(UNIT_1D, delta_potential(grid, 3.0), grid, 1.0)
    assert (check.N_e, check.n1, check.agree) == (1, 1, True)


def test_counting_identity_free_operator():
    grid = TorusGrid(2, 8)
    check = verify_bs_principle(BCS_2D, zero_potential(grid), grid, 0.1)
    assert (check.N_e, check.n1, check.agree) == (0, 0, True)


def test_counting_identity_gaussian():
    grid = TorusGrid(2, 16)
    check = verify_bs_principle(BCS_2D, gaussian_potential(grid, 1.0, 2.0), grid, 0.05)
    assert check.agree or check.indeterminate


def test_counting_identity_rejects_sign_changing_potential():
    grid = TorusGrid(1, 4)
    V = delta_potential(grid, -1.0)
    with pytest.raises(ValueError):
        verify_bs_principle(UNIT_1D, V, grid, 0.1)


def test_counting_identity_over_seeded_family():
    grid = TorusGrid(2, 16)
    checks = []
    for s in range(20):
        V = random_potential(grid, 1.0, seed=s, radius=3.0)
        spectrum = negative_eigenvalues(BCS_2D, V, grid)
        checks.extend(verify_bs_principle(BCS_2D, V, grid, e, spectrum=spectrum) for e in (0.01, 0.05, 0.2, 1.5))
    determinate = [c for c in checks if not c.indeterminate]
    assert len(determinate) >= 0.95 * len(checks)
    assert all(c.agree for c in determinate)


@pytest.mark.parametrize("factory", [lambda g: delta_potential(g, 0.5), lambda g: plateau_potential(g, 1.0, 2.0)])
def test_secular_solver_matches_dense(factory):
    grid = TorusGrid(2, 16)
    V = factory(grid)
    dense = negative_eigenvalues(BCS_2D, V, grid).negative_eigenvalues
    secular = secular_negative_eigenvalues(BCS_2D, V, grid)
    assert secular.method == "secular"
    np.testing.assert_allclose(secular.negative_eigenvalues, dense[dense > 1e-10], rtol=1e-7)


def test_secular_solver_edge_cases():
    grid = TorusGrid(2, 8)
    assert secular_negative_eigenvalues(BCS_2D, zero_potential(grid), grid).count == 0
    with pytest.raises(ValueError):
        secular_negative_eigenvalues(BCS_2D, delta_potential(grid, -1.0), grid)


def test_trace_inequality_identity():
    check = alt_trace_check(np.eye(4), np.eye(4), 2.5)
    assert check.lhs == pytest.approx(4.0)
    assert check.rhs == pytest.approx(4.0)
    assert check.holds


def test_trace_inequality_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        A, B = _random_psd(rng), _random_psd(rng)
        for m in (1.5, 2.0, 3.0):
            assert alt_trace_check(A, B, m).holds
        equal = alt_trace_check(A, B, 1.0)
        assert equal.lhs == pytest.approx(equal.rhs, rel=1e-10)


def test_trace_inequality_validation():
    with pytest.raises(ValueError):
        alt_trace_check(np.eye(2), np.eye(2), 0.5)
    with pytest.raises(ValueError):
        alt_trace_check(np.diag([1.0, -1.0]), np.eye(2), 2.0)
    with pytest.raises(ValueError):
        alt_trace_check(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2), 2.0)


def test_bs_norm_sweep_structural_growth():
    grid = TorusGrid(2, 34)
    V = gaussian_potential(grid, 1.0, 2.0)
    e_grid = [2.0**-k for k in range(1, 9)]
    flat = bs_norm_sweep(BCS_2D, V, grid, e_grid, 2.0)
    assert flat.fit_points == 6
    assert flat.slope >= -1.15
    curved = bs_norm_sweep(BCS_2D, V, grid, e_grid, 3.0)
    assert curved.log_ratio_growth <= 4.0
    assert curved.e_grid == sorted(e_grid, reverse=True)
