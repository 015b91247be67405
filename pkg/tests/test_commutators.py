import numpy as np
import pytest

from qg3.commutators import (
    commutator_Ij,
    commutator_rewrite_at,
    nonlocal_commutator,
    remainder_Rj,
    verify_commutator_scaling,
    verify_degenerate_cases,
    verify_product_commutator,
    verify_remainder_bounds,
    verify_two_path,
)
from qg3.fields import annulus_field, divergence_free_velocity, random_band_limited
from qg3.flow import fitted_flow_constant, identity_flow, translation_flow
from qg3.grid import ScalarField, lp_norm
from qg3.kernel import QuadratureSettings
from qg3.params import PhysicalParams

PAR = PhysicalParams(1.0, 2.0, 0.5)


@pytest.fixture(scope="module")
def blocks(commutator_grid):
    rng = np.random.default_rng(40)
    return {j: annulus_field(commutator_grid, j, rng) for j in (2, 3, 4)}


@pytest.fixture(scope="module")
def c_fit(commutator_flows):
    return max(fitted_flow_constant(list(commutator_flows.values())), 0.1)


class TestTrivialCases:
    def test_identity_flow(self, commutator_grid, blocks):
        fl = identity_flow(commutator_grid, j=2)
        out = commutator_Ij(blocks[2], fl, PAR)
        assert lp_norm(out, np.inf) < 1e-9 * lp_norm(blocks[2], np.inf)

    def test_translation_flow(self, commutator_grid, blocks):
        h = commutator_grid.spacing
        fl = translation_flow(commutator_grid, (4 * h, -2 * h, h), j=2)
        out = commutator_Ij(blocks[2], fl, PAR)
        assert lp_norm(out, np.inf) < 1e-9 * lp_norm(blocks[2], np.inf)

    def test_flow_without_index_rejected(self, blocks):
        class Bare:
            j = None

        with pytest.raises(ValueError):
            commutator_Ij(blocks[2], Bare(), PAR)

    def test_degenerate_report(self, commutator_grid, commutator_flows):
        rep = verify_degenerate_cases(commutator_grid, commutator_flows[(3, 0.1)])
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]

    def test_nonlocal_zero_coefficient(self, commutator_grid, commutator_flows, blocks):
        for par in (PhysicalParams(2.0, 2.0, 0.5), PhysicalParams(1.0, 3.0, 1.0)):
            out = nonlocal_commutator(blocks[3], commutator_flows[(3, 0.1)], par)
            assert lp_norm(out, np.inf) == 0.0


class TestScaling:
    def test_report(self, commutator_flows, blocks, c_fit):
        flows_by_j = {j: commutator_flows[(j, 0.1)] for j in (2, 3, 4)}
        flows_by_v = {V: commutator_flows[(3, V)] for V in (0.05, 0.1, 0.2)}
        rep = verify_commutator_scaling(PAR, flows_by_j, flows_by_v, blocks,
                                        c_flow=c_fit)
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]
        assert 0.75 <= rep.fitted["slope_j"] <= 1.25
        assert 0.8 <= rep.fitted["slope_V"] <= 1.2
        assert 1.5 <= rep.fitted["slope_Sj"] <= 2.5
        assert rep.fitted["slope_l"] <= -0.75  # much steeper in practice
        assert np.isfinite(rep.fitted["C_envelope"])

    def test_hypothesis_gate(self, commutator_flows, blocks):
        flows_by_j = {3: commutator_flows[(3, 0.2)]}
        with pytest.raises(ValueError, match="smallness"):
            verify_commutator_scaling(PAR, flows_by_j, {}, blocks, c_flow=10.0)


class TestTwoPath:
    def test_agreement(self, commutator_grid, commutator_flows, blocks, c_fit):
        rng = np.random.default_rng(41)
        c = commutator_grid.length / 2
        x = c + rng.uniform(-commutator_grid.length / 6,
                            commutator_grid.length / 6, size=(24, 3))
        rep = verify_two_path(PAR, commutator_flows[(3, 0.1)], blocks[3], x,
                              QuadratureSettings(r_max_factor=0.45, n_radii=32,
                                                 n_polar=12, n_azimuth=20),
                              c_flow=c_fit)
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]
        assert rep.fitted["two_path_err"] < 0.05

    def test_identity_flow_rewrite_zero(self, commutator_grid, blocks):
        fl = identity_flow(commutator_grid, j=3)
        rng = np.random.default_rng(42)
        c = commutator_grid.length / 2
        x = c + rng.uniform(-0.5, 0.5, size=(4, 3))
        out = commutator_rewrite_at(blocks[3], fl, PAR, x,
                                    QuadratureSettings(n_radii=10, n_polar=6,
                                                       n_azimuth=8))
        assert np.abs(out["value"]).max() < 1e-10 * lp_norm(blocks[3], np.inf)

    def test_b_integrand_inner_decay(self, commutator_grid, commutator_flows,
                                     blocks, c_fit):
        rng = np.random.default_rng(43)
        c = commutator_grid.length / 2
        x = c + rng.uniform(-0.5, 0.5, size=(6, 3))
        out = commutator_rewrite_at(blocks[3], commutator_flows[(3, 0.1)], PAR, x,
                                    QuadratureSettings(n_radii=20, n_polar=8,
                                                       n_azimuth=12), c_flow=c_fit)
        radii = out["radii"]
        prof = np.abs(out["B_shells"]).mean(axis=1)
        inner = radii < radii[0] * (radii[-1] / radii[0]) ** 0.4
        slope = np.polyfit(np.log(radii[inner]), np.log(prof[inner] + 1e-300), 1)[0]
        assert slope > 0.5


class TestRemainder:
    def test_zero_velocity(self, commutator_grid):
        rng = np.random.default_rng(44)
        u = random_band_limited(commutator_grid, rng, 2, 20)
        zero = tuple(ScalarField(commutator_grid,
                                 np.zeros((commutator_grid.n,) * 3)) for _ in range(3))
        r = remainder_Rj(zero, u, 3)
        assert lp_norm(r, np.inf) == 0.0

    def test_constant_velocity(self, commutator_grid):
        rng = np.random.default_rng(45)
        u = random_band_limited(commutator_grid, rng, 2, 18)
        const = tuple(ScalarField(commutator_grid,
                                  np.full((commutator_grid.n,) * 3, c))
                      for c in (0.4, -0.2, 0.3))
        r = remainder_Rj(const, u, 3)
        # S_{j-1} of a constant is the constant and Delta_j commutes with
        # constant advection, so the remainder vanishes identically
        assert lp_norm(r, np.inf) < 1e-10 * lp_norm(u, np.inf)

    def test_non_divfree_rejected(self, commutator_grid):
        rng = np.random.default_rng(46)
        u = random_band_limited(commutator_grid, rng, 2, 18)
        x1 = commutator_grid.coords()[0]
        bad = (ScalarField(commutator_grid, np.sin(4 * x1)),
               ScalarField(commutator_grid, np.zeros((commutator_grid.n,) * 3)),
               ScalarField(commutator_grid, np.zeros((commutator_grid.n,) * 3)))
        with pytest.raises(ValueError, match="divergence"):
            remainder_Rj(bad, u, 3)

    def test_bounds_report(self, commutator_grid):
        rng = np.random.default_rng(47)
        v = divergence_free_velocity(commutator_grid, rng, kmax=6.0, grad_linf=1.0)
        fields = [random_band_limited(commutator_grid, np.random.default_rng(s), 2, 24)
                  for s in (48, 49)]
        rep = verify_remainder_bounds(v, fields, j_list=(2, 3, 4))
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]


class TestProductCommutator:
    def test_constant_stable(self, commutator_grid):
        rng = np.random.default_rng(50)
        pairs = []
        for s in (51, 52):
            f = random_band_limited(commutator_grid, np.random.default_rng(s), 1, 8)
            g = random_band_limited(commutator_grid, np.random.default_rng(s + 10),
                                    1, 8)
            pairs.append((f, g))
        rep = verify_product_commutator(PAR, pairs)
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]
