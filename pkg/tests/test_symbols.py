import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qg3.fields import pure_mode, random_band_limited
from qg3.grid import Grid3, ScalarField, spectral_derivative
from qg3.params import PhysicalParams
from qg3.symbols import (
    apply_deltaF_inverse,
    apply_gamma,
    apply_lambda_spectral,
    biot_savart,
    q_symbol,
    reconstruct_omega,
    verify_biot_savart,
    verify_gamma_decomposition,
    verify_symbol_ellipticity,
)

GRID = Grid3(32, 2 * np.pi)


def q_scalar(xi, params):
    x1, x2, x3 = xi
    xi2 = x1**2 + x2**2 + x3**2
    xiF2 = x1**2 + x2**2 + params.F**2 * x3**2
    if xiF2 == 0:
        return 0.0
    return xi2 / xiF2 * (params.nu * (x1**2 + x2**2)
                         + params.nu_prime * params.F**2 * x3**2)


class TestParams:
    def test_derived(self):
        p = PhysicalParams(nu=1.0, nu_prime=4.0, F=0.5)
        assert p.nu0 == 1.0
        assert (p.M, p.M_prime) == (1.0, 4.0)
        assert p.M_visc == 4.0
        assert min(p.M, p.M_prime) == 1.0
        assert max(p.M, p.M_prime) == p.M_visc

    def test_validation(self):
        with pytest.raises(ValueError):
            PhysicalParams(nu=-1.0, nu_prime=1.0, F=0.5)
        with pytest.raises(ValueError):
            PhysicalParams(nu=1.0, nu_prime=1.0, F=1.5)
        with pytest.raises(ValueError):
            PhysicalParams(nu=1.0, nu_prime=0.0, F=0.5)

    @given(st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.05, 1))
    @settings(max_examples=50, deadline=None)
    def test_ratio_invariants(self, nu, nup, F):
        p = PhysicalParams(nu, nup, F)
        assert min(p.M, p.M_prime) == pytest.approx(1.0)
        assert max(p.M, p.M_prime) == pytest.approx(p.M_visc)


class TestSymbolAlgebra:
    @given(st.floats(-8, 8), st.floats(-8, 8), st.floats(-8, 8), st.floats(0.2, 4))
    @settings(max_examples=60, deadline=None)
    def test_ellipticity_pointwise(self, x1, x2, x3, lam):
        p = PhysicalParams(1.0, 3.0, 0.6)
        xi2 = x1**2 + x2**2 + x3**2
        q = q_scalar((x1, x2, x3), p)
        assert q >= min(p.nu, p.nu_prime) * xi2 - 1e-9 * max(1, xi2)
        assert q <= max(p.nu, p.nu_prime) * xi2 + 1e-9 * max(1, xi2)
        # degree-2 homogeneity
        assert q_scalar((lam * x1, lam * x2, lam * x3), p) == pytest.approx(
            lam**2 * q, rel=1e-9, abs=1e-12)

    def test_horizontal_mode_collapses_to_nu(self):
        p = PhysicalParams(1.3, 2.7, 0.5)
        u = pure_mode(GRID, (3, 0, 0))
        out = apply_gamma(u, p)
        k = 3 * 2 * np.pi / GRID.length
        assert np.abs(out.values + p.nu * k**2 * u.values).max() < 1e-10

    def test_vertical_mode_collapses_to_nu_prime(self):
        p = PhysicalParams(1.3, 2.7, 0.5)
        u = pure_mode(GRID, (0, 0, 2))
        out = apply_gamma(u, p)
        k = 2 * 2 * np.pi / GRID.length
        assert np.abs(out.values + p.nu_prime * k**2 * u.values).max() < 1e-10

    def test_lambda_kills_x3_independent(self):
        p = PhysicalParams(1.0, 2.0, 0.5)
        u = pure_mode(GRID, (2, 1, 0))
        out = apply_lambda_spectral(u, p)
        assert np.abs(out.values).max() < 1e-12

    def test_lambda_self_adjoint_negative(self):
        p = PhysicalParams(1.0, 2.0, 0.5)
        rng = np.random.default_rng(7)
        u = random_band_limited(GRID, rng, 1, 6)
        v = random_band_limited(GRID, rng, 1, 6)
        lu, lv = apply_lambda_spectral(u, p), apply_lambda_spectral(v, p)
        ip = GRID.spacing**3
        assert (lu.values * v.values).sum() * ip == pytest.approx(
            (u.values * lv.values).sum() * ip, rel=1e-10, abs=1e-12)
        assert (lu.values * u.values).sum() * ip <= 1e-12

    def test_lambda_commutes_with_quarter_turn(self):
        p = PhysicalParams(1.0, 2.0, 0.5)
        rng = np.random.default_rng(8)
        u = random_band_limited(GRID, rng, 1, 6)
        # 90-degree rotation in the (x1, x2) plane: (i, j, k) -> (j, n-i, k)
        rot = lambda a: np.rot90(a, k=1, axes=(0, 1))
        lhs = apply_lambda_spectral(ScalarField(GRID, rot(u.values)), p).values
        rhs = rot(apply_lambda_spectral(u, p).values)
        assert np.abs(lhs - rhs).max() < 1e-11

    def test_deltaF_inverse_roundtrip(self):
        p = PhysicalParams(1.0, 2.0, 0.5)
        rng = np.random.default_rng(9)
        u = random_band_limited(GRID, rng, 1, 6)
        u = ScalarField(GRID, u.values - u.values.mean())
        w = apply_deltaF_inverse(u, p)
        back = (spectral_derivative(spectral_derivative(w, 0), 0).values
                + spectral_derivative(spectral_derivative(w, 1), 1).values
                + p.F**2 * spectral_derivative(spectral_derivative(w, 2), 2).values)
        assert np.abs(back - u.values).max() < 1e-9


class TestGammaDecomposition:
    def fields(self, seed=0):
        rng = np.random.default_rng(seed)
        return [random_band_limited(GRID, rng, 1, 8) for _ in range(3)]

    @pytest.mark.parametrize("nu,nup,F", [
        (1.0, 1.0, 0.5),   # nu = nu': pure Laplacian, nonlocal part vanishes
        (1.0, 2.0, 1.0),   # F = 1: constant coefficients, nonlocal part vanishes
        (1.0, 2.0, 0.5),
        (3.0, 1.0, 0.25),
        (0.5, 5.0, 0.75),
    ])
    def test_identity_across_params(self, nu, nup, F):
        p = PhysicalParams(nu, nup, F)
        rep = verify_gamma_decomposition(p, GRID, self.fields())
        assert rep.passed, rep.notes

    def test_degenerate_cases_have_zero_coefficient(self):
        assert PhysicalParams(1.0, 1.0, 0.5).nonlocal_coeff == 0.0
        assert PhysicalParams(1.0, 2.0, 1.0).nonlocal_coeff == 0.0

    def test_nu_equal_gives_laplacian(self):
        p = PhysicalParams(2.0, 2.0, 0.5)
        q = q_symbol(GRID, p)
        assert np.abs(q - 2.0 * GRID.freq_norm2()).max() < 1e-12

    def test_F_one_gives_constant_coefficients(self):
        p = PhysicalParams(1.0, 3.0, 1.0)
        q = q_symbol(GRID, p)
        k1, k2, k3 = GRID.freqs()
        expected = 1.0 * (k1**2 + k2**2) + 3.0 * k3**2
        assert np.abs(q - expected).max() < 1e-12

    def test_ellipticity_report(self):
        rep = verify_symbol_ellipticity(PhysicalParams(1.0, 5.0, 0.5), GRID)
        assert rep.passed


class TestBiotSavart:
    P = PhysicalParams(1.0, 2.0, 0.5)

    def test_zero_gives_zero(self):
        om = ScalarField(GRID, np.zeros((GRID.n,) * 3))
        U = biot_savart(om, self.P)
        for c in U:
            assert np.abs(c.values).max() == 0.0

    def test_u3_identically_zero(self):
        rng = np.random.default_rng(3)
        om = random_band_limited(GRID, rng, 1, 6)
        U = biot_savart(om, self.P)
        assert np.abs(U[2].values).max() == 0.0

    def test_reconstruction(self):
        rng = np.random.default_rng(4)
        om = random_band_limited(GRID, rng, 1, 6)
        om = ScalarField(GRID, om.values - om.values.mean())
        U = biot_savart(om, self.P)
        rec = reconstruct_omega(U, self.P)
        err = np.abs(rec.values - om.values).max() / np.abs(om.values).max()
        assert err < 1e-10

    def test_report_passes(self):
        rng = np.random.default_rng(5)
        om = random_band_limited(GRID, rng, 1, 6)
        rep = verify_biot_savart(self.P, om)
        assert rep.passed

    def test_horizontal_divergence_free(self):
        rng = np.random.default_rng(6)
        om = random_band_limited(GRID, rng, 1, 6)
        U = biot_savart(om, self.P)
        div = (spectral_derivative(U[0], 0).values
               + spectral_derivative(U[1], 1).values)
        assert np.abs(div).max() < 1e-10 * np.abs(U[0].values).max()
