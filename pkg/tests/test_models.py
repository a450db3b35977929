import numpy as np
import pytest

from lattice_spectra.lattice import Box, coefficients_equal, truncate
from lattice_spectra.models import (
    PhysicalParams,
    TailData,
    build_dirac,
    build_klein_gordon,
    build_schrodinger,
    compact_well,
    constant_profile,
    delta_well,
    gamma_matrices,
    gaussian_well,
    kg_annulus,
    laplacian,
    laplacian_symbol,
)
from lattice_spectra.numerics import hermitian_eigs
from lattice_spectra.symbols import symbol_at, torus_grid


def test_laplacian_coefficients_1d():
    G = laplacian(1)
    table = {a: c.value[0, 0] for a, c in G.coeffs.items()}
    assert table == {(0,): 2, (1,): -1, (-1,): -1}


def test_laplacian_symbol_values():
    assert laplacian_symbol(np.array([[np.pi] * 3]))[0] == pytest.approx(12.0)
    assert laplacian_symbol(np.zeros((1, 2)))[0] == 0.0
    phi = torus_grid(2, 8)
    assert np.allclose(symbol_at(laplacian(2), phi)[:, 0, 0], laplacian_symbol(phi), atol=1e-14)


def test_free_schrodinger_is_laplacian():
    assert coefficients_equal(build_schrodinger(1), laplacian(1), Box(1, 2))


def test_constant_magnetic_phase_is_gauge_equivalent():
    theta = 0.83
    H = build_schrodinger(1, magnetic=[lambda p: np.full(len(p), theta)])
    box = Box(1, 40)
    M = truncate(H, box)
    x = box.points[:, 0]
    U = np.diag(np.exp(-1j * theta * x))
    assert np.allclose(U.conj().T @ M @ U, truncate(laplacian(1), box), atol=1e-12)
    w1, _ = hermitian_eigs(M)
    w0, _ = hermitian_eigs(truncate(laplacian(1), box))
    assert np.abs(w1 - w0).max() <= 1e-9


def test_delta_well_lowest_eigenvalue():
    H = build_schrodinger(1, potential=delta_well(1.5))
    w, _ = hermitian_eigs(truncate(H, Box(1, 60)))
    assert w[0] == pytest.approx(-0.5, abs=1e-3)


def test_gamma_matrices_clifford_relations():
    g = gamma_matrices()
    E = np.eye(4)
    for j in range(4):
        assert np.array_equal(g[j], g[j].conj().T)
        for k in range(4):
            anti = g[j] @ g[k] + g[k] @ g[j]
            assert np.array_equal(anti, 2 * E if j == k else 0 * E)
        w = np.linalg.eigvalsh(g[j])
        assert np.allclose(w, [-1, -1, 1, 1])


def test_dirac_symbol_at_origin_and_corner():
    D = build_dirac(PhysicalParams())
    w0 = np.linalg.eigvalsh(symbol_at(D, np.zeros((1, 3)))[0])
    assert np.allclose(w0, [-1] * 4 + [1] * 4, atol=1e-14)
    wpi = np.linalg.eigvalsh(symbol_at(D, np.full((1, 3), np.pi))[0])
    assert np.allclose(np.abs(wpi), np.sqrt(13), atol=1e-12)


def test_dirac_with_scalar_potential_shifts_diagonal():
    p = PhysicalParams(e=2.0)
    D = build_dirac(p, constant_profile(1.5, 3))
    a0 = D.coefficient((0, 0, 0))(np.zeros((1, 3), int))[0]
    free = build_dirac(p).coefficient((0, 0, 0)).value
    assert np.allclose(a0 - free, 3.0 * np.eye(8))


def test_dirac_rejects_matrix_potential():
    with pytest.raises(ValueError):
        build_dirac(PhysicalParams(), constant_profile(np.eye(2), 3))


def test_kg_band_truncation():
    kg = build_klein_gordon(1)
    assert kg.bandwidth <= 40
    assert kg.tail_bound <= 1e-8
    vals = symbol_at(kg.operator, torus_grid(1, 512))[:, 0, 0]
    assert np.abs(vals.imag).max() < 1e-12
    assert vals.real.min() >= 1 - 1e-8
    assert vals.real.max() <= np.sqrt(5) + 1e-8
    assert kg_annulus(PhysicalParams()) == pytest.approx((3 + np.sqrt(5)) / 2)


def test_kg_heavy_mass_taylor():
    m = 100.0
    kg = build_klein_gordon(1, PhysicalParams(m=m))
    a = {al[0]: c.value[0, 0].real for al, c in kg.operator.coeffs.items()}
    # k ~ m + Gamma/(2m): a_0 ~ m + 1/m, a_{+-1} ~ -1/(2m)
    assert a[0] == pytest.approx(m + 1 / m, abs=1e-4)
    assert a[1] == pytest.approx(-1 / (2 * m), abs=1e-4)
    assert a[-1] == pytest.approx(-1 / (2 * m), abs=1e-4)


def test_kg_constant_potential_shifts_diagonal_exactly():
    free = build_klein_gordon(1).operator
    shifted = build_klein_gordon(1, potential=constant_profile(5.0, 1)).operator
    x = np.zeros((1, 1), int)
    assert shifted.coefficient((0,))(x)[0, 0, 0] == free.coefficient((0,))(x)[0, 0, 0] + 5.0
    assert shifted.coefficient((3,))(x)[0, 0, 0] == free.coefficient((3,))(x)[0, 0, 0]


def test_tail_data_validation():
    with pytest.raises(ValueError):
        TailData((1.0,), (0.0,))
    with pytest.raises(ValueError):
        TailData((2.0, 1.0), (2.0, 3.0))
    t = TailData.two_sided(TailData.scalar(0, 1), TailData.scalar(-2, 0.5))
    assert (t.phi_inf, t.phi_sup) == (-2.0, 1.0)


def test_physical_params_positive():
    with pytest.raises(ValueError):
        PhysicalParams(m=0.0)


def test_compact_well_rejects_non_hermitian():
    with pytest.raises(ValueError):
        compact_well({(0,): [[0, 1], [0, 0]]}, 1, 2)


def test_gaussian_well_tail():
    prof = gaussian_well(3.0, 3)
    assert prof.tail == TailData.scalar(0.0, 0.0)
    lo, hi = prof.probe_tail(20)
    assert abs(lo[0]) < 1e-100 and abs(hi[0]) < 1e-100
