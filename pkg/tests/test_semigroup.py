import numpy as np
import pytest

from qg3.fields import pure_mode, random_band_limited
from qg3.grid import Grid3, ScalarField, lp_norm
from qg3.params import PhysicalParams
from qg3.semigroup import (
    apply_semigroup,
    compute_K1,
    kernel_derivative_envelopes,
    verify_kernel_claims,
    verify_scaling_law,
    verify_semigroup_bounds,
)
from qg3.symbols import q_symbol

KGRID = Grid3(128, 64.0)  # kernel grid: Nyquist ~ 6.3, exp(-q0) < 1e-15 there
SGRID = Grid3(32, 2 * np.pi)
ANISO = PhysicalParams(1.0, 5.0, 0.5)
ISO = PhysicalParams(1.0, 1.0, 0.5)


@pytest.fixture(scope="module")
def aniso_kernel():
    return compute_K1(ANISO, KGRID)


class TestKernelProfile:
    def test_under_resolved_grid_rejected(self):
        with pytest.raises(ValueError, match="under-resolved"):
            compute_K1(ISO, Grid3(16, 64.0))

    def test_gaussian_case_is_heat_kernel(self):
        ker = compute_K1(ISO, KGRID)
        x1, x2, x3 = KGRID.coords(centered=True)
        heat = (4 * np.pi) ** -1.5 * np.exp(-(x1**2 + x2**2 + x3**2) / 4.0)
        assert np.abs(ker.centered_values() - heat).max() < 1e-6
        assert ker.min_value >= -1e-12
        assert ker.l1_norm == pytest.approx(1.0, abs=1e-6)

    def test_anisotropic_kernel_goes_negative(self, aniso_kernel):
        assert aniso_kernel.min_value < 0
        assert aniso_kernel.l1_norm > 1.0 + 1e-3

    def test_unit_mass_any_params(self, aniso_kernel):
        cell = KGRID.spacing**3
        assert aniso_kernel.K1.values.sum() * cell == pytest.approx(1.0, abs=1e-8)

    def test_envelope_bounded(self, aniso_kernel):
        envs = kernel_derivative_envelopes(aniso_kernel, k_max=2)
        assert all(np.isfinite(v) for v in envs.values())

    def test_claims_report(self):
        assert verify_kernel_claims(ANISO, KGRID).passed
        assert verify_kernel_claims(ISO, KGRID).passed

    def test_scaling_law(self):
        assert verify_scaling_law(ANISO, KGRID).passed


class TestSemigroupAction:
    P = PhysicalParams(1.0, 2.0, 0.5)

    def test_t_zero_identity(self):
        rng = np.random.default_rng(0)
        u = random_band_limited(SGRID, rng, 1, 6)
        assert apply_semigroup(u, 0.0, self.P) is u

    def test_negative_time_rejected(self):
        u = ScalarField(SGRID, np.zeros((SGRID.n,) * 3))
        with pytest.raises(ValueError):
            apply_semigroup(u, -0.1, self.P)

    def test_pure_mode_scaling(self):
        u = pure_mode(SGRID, (2, 1, 3))
        k = 2 * np.pi / SGRID.length
        q = q_symbol(SGRID, self.P)[2, 1, 3]
        # symbol value at the lattice point equals the analytic q
        x1, x2, x3 = k * 2, k * 1, k * 3
        xi2 = x1**2 + x2**2 + x3**2
        xiF2 = x1**2 + x2**2 + self.P.F**2 * x3**2
        q_exact = xi2 / xiF2 * (self.P.nu * (x1**2 + x2**2)
                                + self.P.nu_prime * self.P.F**2 * x3**2)
        assert q == pytest.approx(q_exact, rel=1e-12)
        out = apply_semigroup(u, 0.3, self.P)
        assert np.abs(out.values - np.exp(-0.3 * q) * u.values).max() < 1e-12

    def test_semigroup_property(self):
        rng = np.random.default_rng(1)
        u = random_band_limited(SGRID, rng, 1, 8)
        one = apply_semigroup(u, 0.7, self.P)
        two = apply_semigroup(apply_semigroup(u, 0.3, self.P), 0.4, self.P)
        err = np.abs(one.values - two.values).max() / np.abs(one.values).max()
        assert err < 1e-10

    def test_mass_conserved(self):
        rng = np.random.default_rng(2)
        u = random_band_limited(SGRID, rng, 1, 8)
        out = apply_semigroup(u, 1.3, self.P)
        assert out.values.mean() == pytest.approx(u.values.mean(), abs=1e-13)

    def test_l2_contraction(self):
        rng = np.random.default_rng(3)
        u = random_band_limited(SGRID, rng, 1, 8)
        for t in (0.01, 0.1, 1.0):
            assert lp_norm(apply_semigroup(u, t, self.P), 2) <= lp_norm(u, 2) + 1e-12

    def test_heat_case_linf_contraction(self):
        # positive kernel: genuine maximum principle
        rng = np.random.default_rng(4)
        u = random_band_limited(SGRID, rng, 1, 8)
        p = PhysicalParams(1.0, 1.0, 0.5)
        for t in (0.05, 0.5):
            assert lp_norm(apply_semigroup(u, t, p), np.inf) <= \
                lp_norm(u, np.inf) * (1 + 1e-10)


class TestSemigroupBounds:
    def test_report(self):
        grid = Grid3(64, 2 * np.pi)
        rep = verify_semigroup_bounds(ANISO, grid, p_list=(2, np.inf),
                                      j_list=(0, 1, 2, 3),
                                      rng=np.random.default_rng(5))
        assert rep.passed, rep.notes

    def test_linf_constant_exceeds_one_when_anisotropic(self):
        # no maximum principle: a sign-matched field pushes the sup-norm up
        from qg3.semigroup import linf_overshoot_witness

        amp = linf_overshoot_witness(ANISO, Grid3(64, 32.0))
        assert amp > 1.0 + 1e-3

    def test_heat_case_has_no_overshoot(self):
        from qg3.semigroup import linf_overshoot_witness

        amp = linf_overshoot_witness(ISO, Grid3(64, 32.0))
        assert amp <= 1.0 + 1e-10
