import json

import numpy as np
import pytest

from qg3.fields import (
    divergence_free_velocity,
    gaussian_bump,
    random_band_limited,
)
from qg3.flow import integrate_flow
from qg3.grid import Grid3, ScalarField, lp_norm, read_snapshot
from qg3.params import PhysicalParams
from qg3.semigroup import apply_semigroup
from qg3.solver import (
    HypothesisError,
    TdqgProblem,
    apriori_ratio,
    check_smallness,
    solve_qg,
    solve_tdqg,
    verify_apriori,
    verify_lp_estimate,
    verify_smoothing,
)
from qg3.symbols import biot_savart, reconstruct_omega, q_symbol

GRID = Grid3(32, 2 * np.pi)
PAR = PhysicalParams(1.0, 2.0, 0.5)


def mk_field(seed=0, kmax=6.0):
    return random_band_limited(GRID, np.random.default_rng(seed), 1, kmax)


def mk_velocity(seed=1, amp=0.3):
    v = divergence_free_velocity(GRID, np.random.default_rng(seed), 5.0,
                                 grad_linf=1.0)
    scale = amp / max(np.abs(c.values).max() for c in v)
    return tuple(ScalarField(GRID, c.values * scale) for c in v)


class TestSolverCore:
    def test_pure_diffusion_matches_semigroup(self):
        u0 = mk_field(0)
        prob = TdqgProblem(params=PAR, u0=u0, t_final=0.5, dt=0.05)
        sol = solve_tdqg(prob)
        exact = apply_semigroup(u0, 0.5, PAR)
        err = np.abs(sol.fields[-1].values - exact.values).max()
        assert err < 1e-12 * np.abs(exact.values).max()

    def test_cfl_rejected(self):
        u0 = mk_field(0)
        v = mk_velocity(amp=2.0)
        prob = TdqgProblem(params=PAR, u0=u0, velocity=v, t_final=1.0, dt=0.5)
        with pytest.raises(ValueError, match="CFL"):
            solve_tdqg(prob)

    def test_non_divfree_rejected(self):
        u0 = mk_field(0)
        x1 = GRID.coords()[0]
        bad = (ScalarField(GRID, 0.1 * np.sin(x1)),
               ScalarField(GRID, np.zeros((GRID.n,) * 3)),
               ScalarField(GRID, np.zeros((GRID.n,) * 3)))
        prob = TdqgProblem(params=PAR, u0=u0, velocity=bad, t_final=0.1, dt=0.01)
        with pytest.raises(ValueError, match="divergence"):
            solve_tdqg(prob)

    def test_mean_conserved(self):
        u0 = mk_field(2)
        v = mk_velocity(3)
        prob = TdqgProblem(params=PAR, u0=u0, velocity=v, t_final=0.4, dt=0.02)
        sol = solve_tdqg(prob)
        assert abs(sol.fields[-1].values.mean() - u0.values.mean()) < 1e-13

    def test_transport_mode_conserves_lp(self):
        # Gamma off, steady velocity: pure advection preserves L^p norms;
        # the sup is measured on a refined grid so a peak moving between
        # lattice nodes does not register as a drift
        from qg3.interp import fourier_upsample

        u0 = gaussian_bump(GRID, width=1.0, mean_zero=True)
        v = mk_velocity(4, amp=0.4)
        prob = TdqgProblem(params=PAR, u0=u0, velocity=v, t_final=0.5, dt=0.004,
                           gamma_off=True)
        sol = solve_tdqg(prob)
        drift2 = abs(lp_norm(sol.fields[-1], 2) / lp_norm(u0, 2) - 1.0)
        assert drift2 < 1e-6
        sup0 = np.abs(fourier_upsample(u0.values, 4)).max()
        sup1 = np.abs(fourier_upsample(sol.fields[-1].values, 4)).max()
        assert abs(sup1 / sup0 - 1.0) < 1e-3

    def test_transport_matches_flow_composition(self):
        # u(t) = u0 o psi_t^{-1} for steady advection
        u0 = gaussian_bump(GRID, width=0.9, mean_zero=True)
        v = mk_velocity(5, amp=0.4)
        t_final = 0.5
        prob = TdqgProblem(params=PAR, u0=u0, velocity=v, t_final=t_final,
                           dt=0.005, gamma_off=True)
        sol = solve_tdqg(prob)
        fl = integrate_flow(v, j=6, t_final=t_final)  # high j: no truncation
        ref = fl.compose_inverse(u0)
        err = np.abs(sol.fields[-1].values - ref.values).max()
        assert err < 2e-3 * np.abs(u0.values).max()

    def test_second_order_convergence(self):
        u0 = mk_field(6, kmax=4.0)
        v = mk_velocity(7, amp=0.3)

        def run(dt):
            prob = TdqgProblem(params=PAR, u0=u0, velocity=v, t_final=0.2, dt=dt)
            return solve_tdqg(prob).fields[-1].values

        ref = run(0.0025)
        e1 = np.abs(run(0.02) - ref).max()
        e2 = np.abs(run(0.01) - ref).max()
        assert 3.0 < e1 / e2 < 5.5

    def test_duhamel_one_step(self):
        # linear problem with forcing only: one step equals the Duhamel
        # quadrature with the midpoint rule
        u0 = mk_field(8, kmax=4.0)
        f_e = mk_field(9, kmax=4.0)
        dt = 1e-3
        prob = TdqgProblem(params=PAR, u0=u0, forcing=lambda t: f_e,
                           t_final=dt, dt=dt)
        sol = solve_tdqg(prob)
        q = q_symbol(GRID, PAR)
        step = np.fft.ifftn(np.exp(-dt * q) * np.fft.fftn(u0.values)).real \
            + dt * np.fft.ifftn(np.exp(-dt / 2 * q) * np.fft.fftn(f_e.values)).real
        assert np.abs(sol.fields[-1].values - step).max() < 1e-8

    def test_archive_roundtrip(self, tmp_path):
        u0 = mk_field(10)
        prob = TdqgProblem(params=PAR, u0=u0, t_final=0.1, dt=0.05)
        sol = solve_tdqg(prob)
        sol.save(tmp_path / "run")
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["grid"]["n"] == GRID.n
        assert "cond1_short_time" in manifest["hypotheses"]
        back = read_snapshot(tmp_path / "run" / "u_00000.qg3f")
        assert np.array_equal(back.values, u0.values)


class TestQgSystem:
    def test_zero_stays_zero(self):
        om0 = ScalarField(GRID, np.zeros((GRID.n,) * 3))
        sol = solve_qg(om0, PAR, t_final=0.1, dt=0.02)
        assert np.abs(sol.fields[-1].values).max() == 0.0

    def test_energy_nonincreasing(self):
        om0 = mk_field(11, kmax=5.0)
        om0 = ScalarField(GRID, 0.3 * (om0.values - om0.values.mean()))
        sol = solve_qg(om0, PAR, t_final=0.5, dt=0.01)
        energies = [lp_norm(f, 2) for f in sol.fields]
        for a, b in zip(energies, energies[1:]):
            assert b <= a * (1 + 1e-6)

    def test_velocity_law_holds_along_run(self):
        om0 = mk_field(12, kmax=5.0)
        om0 = ScalarField(GRID, 0.3 * (om0.values - om0.values.mean()))
        sol = solve_qg(om0, PAR, t_final=0.2, dt=0.01)
        om_end = sol.fields[-1]
        U = biot_savart(om_end, PAR)
        rec = reconstruct_omega(U, PAR)
        err = np.abs(rec.values - om_end.values).max()
        assert err < 1e-8 * np.abs(om_end.values).max()

    def test_reports_velocity_bound(self):
        om0 = mk_field(13, kmax=5.0)
        om0 = ScalarField(GRID, 0.3 * (om0.values - om0.values.mean()))
        sol = solve_qg(om0, PAR, t_final=0.1, dt=0.02)
        assert sol.v_l6 > 0.0


class TestLpEstimate:
    def test_heat_contraction_ratio_one(self):
        par = PhysicalParams(1.0, 1.0, 0.5)
        u0 = mk_field(14)
        prob = TdqgProblem(params=par, u0=u0, t_final=1.0, dt=0.05)
        sol = solve_tdqg(prob)
        rep = verify_lp_estimate(sol, p_list=(np.inf,))
        assert rep.passed
        # positive kernel: no overshoot at all
        assert rep.fitted["D_pinf"] <= 1.0 + 1e-10

    def test_advected_run(self):
        u0 = mk_field(15)
        v = mk_velocity(16, amp=0.2)
        prob = TdqgProblem(params=PAR, u0=u0, velocity=v, t_final=1.0, dt=0.02)
        sol = solve_tdqg(prob)
        rep = verify_lp_estimate(sol, p_list=(2, 4, np.inf))
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]

    def test_amplitude_invariance(self):
        u0 = mk_field(17)
        v = mk_velocity(18, amp=0.2)
        sols = []
        for amp in (1.0, 7.0):
            scaled = ScalarField(GRID, amp * u0.values)
            prob = TdqgProblem(params=PAR, u0=scaled, velocity=v,
                               t_final=0.3, dt=0.02)
            sols.append(solve_tdqg(prob))
        r1 = verify_lp_estimate(sols[0], (2,)).fitted["D_p2"]
        r2 = verify_lp_estimate(sols[1], (2,)).fitted["D_p2"]
        assert r1 == pytest.approx(r2, rel=1e-10)


@pytest.fixture(scope="module")
def forced_solution():
    u0 = mk_field(20, kmax=5.0)
    v = mk_velocity(21, amp=0.15)
    f_e = random_band_limited(GRID, np.random.default_rng(22), 1, 5.0)

    def forcing(t):
        return ScalarField(GRID, 0.2 * np.cos(t) * f_e.values)

    prob = TdqgProblem(params=PAR, u0=u0, velocity=v, forcing=forcing,
                       t_final=0.5, dt=0.025)
    return solve_tdqg(prob)


class TestSmoothing:
    def test_hypotheses_evaluated(self, forced_solution):
        hyp = check_smallness(PAR, forced_solution.v_l6,
                              forced_solution.v_grad_int,
                              float(forced_solution.times[-1]))
        assert hyp["cond1_short_time"] and hyp["cond2_gradient_budget"]

    def test_report(self, forced_solution):
        rep = verify_smoothing(forced_solution)
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]
        assert rep.fitted["max_ratio"] < 50.0

    def test_hypothesis_gate(self):
        u0 = mk_field(23)
        v = mk_velocity(24, amp=3.0)  # violent velocity breaks condition 1
        prob = TdqgProblem(params=PhysicalParams(0.05, 0.1, 0.5), u0=u0,
                           velocity=v, t_final=0.5, dt=0.004)
        sol = solve_tdqg(prob)
        with pytest.raises(HypothesisError):
            verify_smoothing(sol)

    def test_linear_in_amplitude(self):
        # pure diffusion with bounded data: the r=1, p=inf ratio is exactly
        # amplitude-homogeneous
        u0 = gaussian_bump(GRID, width=0.8, mean_zero=True)
        vals = []
        for amp in (1.0, 5.0):
            prob = TdqgProblem(params=PAR,
                               u0=ScalarField(GRID, amp * u0.values),
                               t_final=0.4, dt=0.02)
            sol = solve_tdqg(prob)
            from qg3.solver import smoothing_ratio

            vals.append(smoothing_ratio(sol, 1, np.inf))
        assert vals[0] == pytest.approx(vals[1], rel=1e-9)


class TestApriori:
    def test_invalid_indices_rejected(self, forced_solution):
        with pytest.raises(ValueError):
            apriori_ratio(forced_solution, s=0.5, r=2)
        with pytest.raises(ValueError):
            apriori_ratio(forced_solution, s=1.5, r=np.inf)

    def test_report(self, forced_solution):
        rep = verify_apriori(forced_solution)
        assert rep.passed, [n for n in rep.notes if n.startswith("FAIL")]
        assert any("skip" in n for n in rep.notes)  # s=0.5, r=2 inadmissible

    def test_pure_ge_forcing_linear(self):
        g_e = random_band_limited(GRID, np.random.default_rng(25), 1, 5.0)
        zero = ScalarField(GRID, np.zeros((GRID.n,) * 3))
        vals = []
        for amp in (1.0, 4.0):
            prob = TdqgProblem(
                params=PAR, u0=zero,
                forcing_g=lambda t, a=amp: ScalarField(GRID, a * g_e.values),
                t_final=0.3, dt=0.02)
            sol = solve_tdqg(prob)
            s = 2.0 / 2
            from qg3.lp import tilde_besov_norm

            lhs = (PAR.nu0 * 2) ** 0.5 * tilde_besov_norm(
                sol.fields, sol.times, 2, -0.5 + 1.0, 2, np.inf)
            vals.append(lhs / amp)
        assert vals[0] == pytest.approx(vals[1], rel=1e-9)
