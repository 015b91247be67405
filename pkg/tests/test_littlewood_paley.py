import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qg3.fields import annulus_field, pure_mode, random_band_limited
from qg3.grid import Grid3, ScalarField, lp_norm, spectral_derivative
from qg3.lp import (
    DyadicPartition,
    besov_norm,
    block_field,
    bony_decompose,
    chi_profile,
    decompose,
    fd_besov_norm,
    low_cut_field,
    phi_profile,
    product_is_resolved,
    tilde_besov_norm,
    time_besov_norm,
)

GRID = Grid3(64, 2 * np.pi)
RNG = np.random.default_rng(42)


class TestPartition:
    def test_chi_support(self):
        r = np.array([0.0, 0.5, 0.75, 1.0, 4 / 3, 2.0])
        c = chi_profile(r)
        assert np.all(c[:3] == 1.0)
        assert c[3] < 1.0
        assert np.all(c[4:] == 0.0)

    def test_chi_monotone(self):
        r = np.linspace(0, 2, 400)
        c = chi_profile(r)
        assert np.all(np.diff(c) <= 1e-12)

    def test_phi_support_annulus(self):
        r = np.array([0.5, 0.74, 1.0, 1.5, 2.0, 8 / 3, 3.0])
        ph = phi_profile(r)
        assert ph[0] == 0.0 and ph[1] == 0.0
        assert np.all(ph[2:5] > 0.0)
        assert ph[5] == pytest.approx(0.0, abs=1e-15)
        assert ph[6] == 0.0

    @given(st.floats(0.05, 30.0))
    @settings(max_examples=80, deadline=None)
    def test_telescoping_pointwise(self, r):
        # chi(r) + sum_{l=0..L} phi(2^-l r) == chi(2^-(L+1) r) == 1 for big L
        total = chi_profile(r)
        for l in range(0, 8):
            total += phi_profile(r / 2.0**l)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_partition_residual_on_grid(self):
        part = DyadicPartition(GRID)
        assert part.partition_residual(0, part.cover_index()) < 1e-10

    def test_homogeneous_sum_on_resolved_annulus(self):
        part = DyadicPartition(GRID)
        res = part.homogeneous_residual(-3, part.cover_index())
        assert res < 1e-10


class TestDecomposition:
    def test_pure_mode_hits_adjacent_blocks(self):
        u = pure_mode(GRID, (4, 0, 0))  # |xi| = 4 = 2^2
        dec = decompose(u)
        active = [j for j, b in dec.blocks.items()
                  if lp_norm(b, np.inf) > 1e-12]
        assert set(active) <= {1, 2, 3}
        assert 2 in active or 1 in active

    def test_constant_only_low_block(self):
        u = ScalarField(GRID, np.full((GRID.n,) * 3, 2.5))
        dec = decompose(u)
        assert lp_norm(dec.blocks[-1], np.inf) == pytest.approx(2.5, abs=1e-12)
        for j in range(0, dec.j_max + 1):
            assert lp_norm(dec.blocks[j], np.inf) < 1e-12

    def test_reconstruction(self):
        u = random_band_limited(GRID, RNG, 1, 20)
        dec = decompose(u)
        err = np.abs(dec.reconstruct().values - u.values).max()
        assert err < 1e-10 * np.abs(u.values).max()

    def test_near_orthogonality(self):
        u = random_band_limited(GRID, RNG, 1, 20)
        for j in (0, 1, 2):
            bj = block_field(u, j)
            for jp in range(j + 2, 5):
                double = block_field(bj, jp)
                assert lp_norm(double, np.inf) < 1e-13 * lp_norm(u, np.inf)
        # adjacent blocks genuinely overlap
        b1 = block_field(u, 1)
        assert lp_norm(block_field(b1, 2), np.inf) > 1e-8 * lp_norm(u, np.inf)

    def test_block_lp_bound(self):
        # uniform L^p boundedness of the block operators
        for p in (1, 2, np.inf):
            worst = 0.0
            for seed in range(3):
                u = random_band_limited(GRID, np.random.default_rng(seed), 1, 20)
                for j in range(-1, 4):
                    b = low_cut_field(u, j) if j == -1 else block_field(u, j)
                    worst = max(worst, lp_norm(b, p) / lp_norm(u, p))
            assert worst < 3.0

    def test_s_j_equals_partial_sum(self):
        u = random_band_limited(GRID, RNG, 1, 20)
        dec = decompose(u)
        s3 = dec.low_cut(3)
        partial = dec.blocks[-1].values + sum(dec.blocks[j].values for j in range(0, 3))
        assert np.abs(s3.values - partial).max() < 1e-10

    def test_excessive_jmax_rejected(self):
        u = random_band_limited(GRID, RNG, 1, 4)
        with pytest.raises(ValueError):
            decompose(u, j_range=(0, 12))

    def test_bernstein_ratio(self):
        u = random_band_limited(GRID, RNG, 1, 20)
        ratios = {}
        for j in (0, 1, 2, 3):
            b = block_field(u, j)
            if lp_norm(b, 2) < 1e-12:
                continue
            grad = np.sqrt(sum(spectral_derivative(b, ax).values ** 2 for ax in range(3)))
            ratios[j] = lp_norm(ScalarField(GRID, grad), 2) / lp_norm(b, 2) / 2.0**j
        vals = np.array(list(ratios.values()))
        assert vals.max() / vals.min() < 3.0
        assert np.all(vals > 0.5) and np.all(vals < 4.0)


class TestBesovNorms:
    def test_single_block_collapses(self):
        rng = np.random.default_rng(3)
        u = annulus_field(GRID, 2, rng)
        for s in (-0.5, 0.0, 0.7, 1.0):
            bn = besov_norm(u, s, 2, np.inf)
            direct = max(2.0 ** (j * s) * lp_norm(block_field(u, j), 2)
                         for j in (1, 2, 3))
            assert bn == pytest.approx(direct, rel=1e-10)
            # within the <= 3-block leakage factor of the naive value
            naive = 2.0 ** (2 * s) * lp_norm(u, 2)
            assert bn / naive < 3.0 * max(2.0**s, 2.0**-s)
            assert bn / naive > 0.3 / max(2.0**s, 2.0**-s)

    def test_b022_comparable_to_l2(self):
        ratios = []
        for seed in range(4):
            u = random_band_limited(GRID, np.random.default_rng(seed), 1, 20)
            ratios.append(besov_norm(u, 0.0, 2, 2) / lp_norm(u, 2))
        ratios = np.array(ratios)
        assert np.all(ratios > 0.5) and np.all(ratios < 2.0)

    def test_zero_field(self):
        z = ScalarField(GRID, np.zeros((GRID.n,) * 3))
        assert besov_norm(z, 0.5, 2, 1) == 0.0


class TestTildeNorms:
    def make_series(self, seed=0, nt=6):
        rng = np.random.default_rng(seed)
        times = np.linspace(0.0, 1.0, nt)
        series = [random_band_limited(GRID, rng, 1, 16) for _ in times]
        return series, times

    @pytest.mark.parametrize("rho,r", [(2, np.inf), (1, 2), (2, 2)])
    def test_minkowski_ordering(self, rho, r):
        series, times = self.make_series()
        tilde = tilde_besov_norm(series, times, rho, 0.3, 2, r)
        plain = time_besov_norm(series, times, rho, 0.3, 2, r)
        if r >= rho:
            assert tilde <= plain * (1 + 1e-10)
        if r <= rho:
            assert tilde >= plain * (1 - 1e-10)

    def test_equal_when_r_equals_rho(self):
        series, times = self.make_series(seed=1)
        tilde = tilde_besov_norm(series, times, 2, 0.0, 2, 2)
        plain = time_besov_norm(series, times, 2, 0.0, 2, 2)
        assert tilde == pytest.approx(plain, rel=1e-10)


class TestFdBesov:
    def test_constant_is_zero(self):
        u = ScalarField(GRID, np.full((GRID.n,) * 3, 1.7))
        assert fd_besov_norm(u, 0.5, 2, 2) == 0.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        u = random_band_limited(GRID, rng, 2, 10)
        shifted = ScalarField(GRID, np.roll(u.values, (5, -3, 2), axis=(0, 1, 2)))
        a = fd_besov_norm(u, 0.5, 2, 2)
        b = fd_besov_norm(shifted, 0.5, 2, 2)
        assert a == pytest.approx(b, rel=1e-10)

    def test_invalid_s_for_order(self):
        u = random_band_limited(GRID, RNG, 2, 10)
        with pytest.raises(ValueError):
            fd_besov_norm(u, 1.0, 2, 2, order=1)
        with pytest.raises(ValueError):
            fd_besov_norm(u, 2.5, 2, 2, order=2)

    @pytest.mark.parametrize("s,order", [(0.3, 1), (0.5, 1), (0.7, 1), (1.0, 2)])
    def test_equivalence_with_dyadic_across_j(self, s, order):
        # ratio fd/dyadic stays within a fixed factor across block scales
        grid = Grid3(64, 2 * np.pi)
        ratios = []
        for j in (0, 1, 2, 3):
            u = annulus_field(grid, j, np.random.default_rng(10 + j))
            fd = fd_besov_norm(u, s, 2, 1, order=order)
            dy = besov_norm(u, s, 2, 1, homogeneous=True, j_range=(-2, 5))
            ratios.append(fd / dy)
        ratios = np.array(ratios)
        assert ratios.max() / ratios.min() < 4.0


class TestBony:
    def test_reconstruction_random(self):
        rng = np.random.default_rng(6)
        u = random_band_limited(GRID, rng, 1, 12)
        v = random_band_limited(GRID, rng, 1, 12)
        assert product_is_resolved(u, v)
        tuv, tvu, rem = bony_decompose(u, v)
        total = tuv.values + tvu.values + rem.values
        err = np.abs(total - u.values * v.values).max()
        assert err < 1e-8 * np.abs(u.values * v.values).max()

    def test_constant_v(self):
        rng = np.random.default_rng(7)
        u = random_band_limited(GRID, rng, 1, 12)
        v = ScalarField(GRID, np.ones((GRID.n,) * 3))
        tuv, tvu, rem = bony_decompose(u, v)
        total = tuv.values + tvu.values + rem.values
        assert np.abs(total - u.values).max() < 1e-10

    def test_distant_blocks_no_remainder(self):
        # single blocks Delta_0 f and Delta_4 g: their own decompositions
        # spread over labels {-1,0,1} and {3,4,5}, which never come within
        # one unit of each other, so every remainder pair vanishes
        rng = np.random.default_rng(8)
        u = block_field(random_band_limited(GRID, rng, 0.8, 2.5), 0)
        v = block_field(random_band_limited(GRID, rng, 10, 30), 4)
        assert lp_norm(v, np.inf) > 0
        tuv, tvu, rem = bony_decompose(u, v)
        assert lp_norm(rem, np.inf) < 1e-12 * lp_norm(u, np.inf) * lp_norm(v, np.inf)
        total = tuv.values + tvu.values + rem.values
        err = np.abs(total - u.values * v.values).max()
        assert err < 1e-8 * np.abs(u.values * v.values).max()
