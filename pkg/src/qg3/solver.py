"""Exponential-integrator solver for the linear transport-diffusion system
and the self-consistent quasi-geostrophic system, plus the estimate checks
that ride on solved trajectories.

Time stepping uses the integrating factor of the diffusion operator with a
midpoint stage, so pure diffusion is integrated exactly and the advection
term converges at second order.  Products are dealiased with the 2/3 rule;
the advection is applied in divergence form, which conserves the mean
exactly for mean-zero forcing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .fields import divergence_linf, gradient_linf
from .grid import Grid3, ScalarField, lp_norm, write_snapshot
from .lp import besov_norm, tilde_besov_norm
from .params import PhysicalParams
from .report import VerificationReport
from .symbols import biot_savart, q_symbol


class HypothesisError(RuntimeError):
    """A theorem's smallness hypothesis fails for the requested run."""


@dataclass
class TdqgProblem:
    """Linear transport-diffusion problem with prescribed velocity.

    velocity: steady triple of ScalarFields, a callable t -> triple, or
    None (pure diffusion).  forcing/forcing_g: callables t -> ScalarField
    for the rough and smooth forcing parts, or None.
    """

    params: PhysicalParams
    u0: ScalarField
    velocity: object = None
    forcing: object = None
    forcing_g: object = None
    t_final: float = 1.0
    dt: float = 0.01
    gamma_off: bool = False   # transport-only test mode

    def velocity_at(self, t: float):
        if self.velocity is None:
            return None
        if callable(self.velocity):
            return self.velocity(t)
        return self.velocity

    def forcing_at(self, t: float) -> np.ndarray | None:
        total = None
        for fn in (self.forcing, self.forcing_g):
            if fn is None:
                continue
            f = fn(t)
            total = f.values if total is None else total + f.values
        return total


@dataclass
class Solution:
    """Archive of a solved trajectory with the data the checks consume."""

    problem: TdqgProblem
    times: np.ndarray
    fields: list = field(repr=False, default_factory=list)
    v_l6: float = 0.0        # sup_t ||v||_{L^6}, the constant C'
    v_grad_int: float = 0.0  # int ||grad v||_inf dt, the budget V(T)

    @property
    def grid(self) -> Grid3:
        return self.problem.u0.grid

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        for i, f in enumerate(self.fields):
            write_snapshot(os.path.join(directory, f"u_{i:05d}.qg3f"), f)
        par = self.problem.params
        manifest = {
            "times": self.times.tolist(),
            "params": {"nu": par.nu, "nu_prime": par.nu_prime, "F": par.F},
            "grid": {"n": self.grid.n, "L": self.grid.length},
            "v_l6": self.v_l6,
            "v_grad_int": self.v_grad_int,
            "hypotheses": check_smallness(par, self.v_l6, self.v_grad_int,
                                          float(self.times[-1])),
        }
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)


def check_smallness(params: PhysicalParams, c_prime: float, v_budget: float,
                    t_span: float, c_univ: float = 1.0,
                    c_F: float = 1.0) -> dict:
    """Evaluate the theorem hypotheses with empirical stand-in constants.

    Condition 1 is implemented in the form the proof uses,
    C C' T^{1/4} <= nu0^{3/4} / 2 (the statement's nu0^3 exponent differs;
    the discrepancy is recorded here and in run manifests).
    """
    nu0 = params.nu0
    cond1 = c_univ * c_prime * t_span**0.25 <= 0.5 * nu0**0.75
    cond2 = np.exp(c_univ * v_budget) - 1.0 <= 1.0 / (c_F * params.M_visc)
    return {
        "cond1_short_time": bool(cond1),
        "cond1_lhs": float(c_univ * c_prime * t_span**0.25),
        "cond1_rhs": float(0.5 * nu0**0.75),
        "cond2_gradient_budget": bool(cond2),
        "cond2_lhs": float(np.exp(c_univ * v_budget) - 1.0),
        "cond2_rhs": float(1.0 / (c_F * params.M_visc)),
        "note": "cond1 uses the proof form C C' T^(1/4) <= nu0^(3/4)/2",
    }


def _dealias_mask(grid: Grid3) -> np.ndarray:
    kk = np.sqrt(grid.freq_norm2())
    return kk <= (2.0 / 3.0) * grid.nyquist


def _advection(u_vals: np.ndarray, v, grid: Grid3, mask: np.ndarray) -> np.ndarray:
    """-div(v u) in spectral form with 2/3-rule dealiasing."""
    k = grid.axis_freqs()
    out = np.zeros_like(u_vals, dtype=np.complex128)
    shapes = [(grid.n, 1, 1), (1, grid.n, 1), (1, 1, grid.n)]
    for ax in range(3):
        prod = np.fft.fftn(v[ax].values * u_vals)
        out -= 1j * k.reshape(shapes[ax]) * prod
    return np.fft.ifftn(np.where(mask, out, 0.0)).real


def _l6_norm(v) -> float:
    grid = v[0].grid
    mag = np.sqrt(sum(c.values**2 for c in v))
    return lp_norm(ScalarField(grid, mag), 6)


def solve_tdqg(problem: TdqgProblem, store_every: int = 1,
               qg_coupling: bool = False) -> Solution:
    """March the transport-diffusion system with the exponential midpoint rule.

    With qg_coupling the velocity is recomputed each stage from the current
    field through the velocity law (the field is then the potential
    vorticity and must be mean-zero).
    """
    grid = problem.u0.grid
    par = problem.params
    dt = problem.dt
    steps = int(round(problem.t_final / dt))
    if abs(steps * dt - problem.t_final) > 1e-9:
        steps = int(np.ceil(problem.t_final / dt))
        dt = problem.t_final / steps

    q = q_symbol(grid, par)
    e_full = np.ones_like(q) if problem.gamma_off else np.exp(-dt * q)
    e_half = np.ones_like(q) if problem.gamma_off else np.exp(-0.5 * dt * q)
    mask = _dealias_mask(grid)

    def velocity(t, u_vals):
        if qg_coupling:
            om = ScalarField(grid, u_vals)
            u1, u2, u3, _ = biot_savart(om, par)
            return (u1, u2, u3)
        return problem.velocity_at(t)

    def rhs(t, u_vals):
        v = velocity(t, u_vals)
        total = np.zeros_like(u_vals)
        if v is not None:
            total = total + _advection(u_vals, v, grid, mask)
        f = problem.forcing_at(t)
        if f is not None:
            total = total + f
        return total, v

    def step_multiplier(vals, mult):
        return np.fft.ifftn(mult * np.fft.fftn(vals)).real

    u = problem.u0.values.copy()
    times = [0.0]
    fields = [problem.u0]
    v_l6 = 0.0
    v_grad = []
    t = 0.0
    v0 = velocity(0.0, u)
    if v0 is not None:
        scale = max(np.abs(c.values).max() for c in v0)
        if divergence_linf(v0) > 1e-8 * max(scale, 1e-30):
            raise ValueError("velocity is not divergence-free within tolerance")
        cfl = 0.5 * grid.spacing / max(scale, 1e-30)
        if dt > cfl:
            raise ValueError(f"dt={dt} violates the advective CFL limit {cfl:.3e}")

    for nstep in range(steps):
        n1, v = rhs(t, u)
        if v is not None:
            v_l6 = max(v_l6, _l6_norm(v))
            v_grad.append(max(gradient_linf(c) for c in v))
        else:
            v_grad.append(0.0)
        u_half = step_multiplier(u + 0.5 * dt * n1, e_half)
        n2, _ = rhs(t + 0.5 * dt, u_half)
        u = step_multiplier(u, e_full) + dt * step_multiplier(n2, e_half)
        t += dt
        if (nstep + 1) % store_every == 0 or nstep == steps - 1:
            times.append(t)
            fields.append(ScalarField(grid, u))

    v_budget = float(np.sum(v_grad) * dt)
    return Solution(problem, np.array(times), fields, v_l6=v_l6,
                    v_grad_int=v_budget)


def solve_qg(omega0: ScalarField, params: PhysicalParams, t_final: float,
             dt: float, store_every: int = 1) -> Solution:
    """Self-consistent run: the velocity comes from the field itself."""
    if abs(float(omega0.values.mean())) > 1e-12 * np.abs(omega0.values).max():
        raise ValueError("initial potential vorticity must be mean-zero")
    prob = TdqgProblem(params=params, u0=omega0, t_final=t_final, dt=dt)
    return solve_tdqg(prob, store_every=store_every, qg_coupling=True)


def verify_lp_estimate(solution: Solution, p_list, c_univ: float = 1.0,
                       flat_tol: float = 1e-3) -> VerificationReport:
    """Growth of ||u||_{L^inf_t L^p} against the forced-data budget.

    On the short window where the proof's smallness condition holds the
    ratio must be bounded by a t-independent constant; over the whole run
    the log of the running-sup ratio must fit an affine function of t (the
    D^t shape).  A numerically flat log-ratio (total variation below
    flat_tol) is a degenerate exact fit and reported with R^2 = 1.
    """
    rep = VerificationReport(
        "lp-estimate",
        ["check_id", "p", "t", "measured", "bound", "fitted_constant", "pass"],
    )
    prob = solution.problem
    times = solution.times
    nu0 = prob.params.nu0
    for p in p_list:
        u0_np = lp_norm(prob.u0, p)
        forcing_int = np.zeros(len(times))
        if prob.forcing is not None or prob.forcing_g is not None:
            fnorms = []
            for t in times:
                f = prob.forcing_at(t)
                fnorms.append(lp_norm(ScalarField(solution.grid, f), p)
                              if f is not None else 0.0)
            for i in range(1, len(times)):
                forcing_int[i] = np.trapezoid(fnorms[:i + 1], times[:i + 1])
        sup_norm = 0.0
        ratios = []
        for i, t in enumerate(times):
            sup_norm = max(sup_norm, lp_norm(solution.fields[i], p))
            ratios.append(sup_norm / (u0_np + forcing_int[i]))
        ratios = np.array(ratios)

        window = times <= (0.5 * nu0**0.75 / max(c_univ * solution.v_l6, 1e-30)) ** 4
        if window.sum() > 1:
            short_c = float(ratios[window].max())
            ok = rep.require(short_c < 10.0,
                             f"p={p}: short-window ratio {short_c:.4f}")
            rep.add_row(check_id="short-window", p=p, t=float(times[window][-1]),
                        measured=short_c, bound=10.0, fitted_constant=short_c,
                        **{"pass": ok})

        logr = np.log(ratios[1:])
        tt = times[1:]
        if np.ptp(logr) < flat_tol:
            # constant ratio: the affine fit is exact and the growth rate zero
            r2, slope, resid = 1.0, 0.0, 0.0
        else:
            coef = np.polyfit(tt, logr, 1)
            slope = coef[0]
            fit = np.polyval(coef, tt)
            resid = float(np.abs(logr - fit).max())
            ss_res = np.sum((logr - fit) ** 2)
            ss_tot = np.sum((logr - logr.mean()) ** 2)
            r2 = 1.0 - ss_res / ss_tot
        # the shape check: either the fit explains the variance, or the
        # series deviates from the best exponential envelope by under 5%
        ok = rep.require(r2 > 0.9 or resid < 0.05,
                         f"p={p}: D^t shape R^2 {r2:.3f}, residual {resid:.4f}")
        rep.add_row(check_id="dt-shape", p=p, t=float(times[-1]),
                    measured=float(np.exp(slope)), bound="", fitted_constant=r2,
                    **{"pass": ok})
        rep.fitted[f"D_p{p}"] = float(np.exp(slope))
        rep.fitted[f"R2_p{p}"] = float(r2)
        rep.fitted[f"resid_p{p}"] = float(resid)
    return rep


def _require_hypotheses(solution: Solution, c_univ: float, c_F: float) -> dict:
    hyp = check_smallness(solution.problem.params, solution.v_l6,
                          solution.v_grad_int, float(solution.times[-1]),
                          c_univ, c_F)
    if not (hyp["cond1_short_time"] and hyp["cond2_gradient_budget"]):
        raise HypothesisError(f"smallness hypotheses violated: {hyp}")
    return hyp


def smoothing_ratio(solution: Solution, r: float, p: float,
                    j_range=None) -> float:
    """(nu0 r)^{1/r} ||u||_{L~^r B^{2/r}_{p,inf}} over the forced-data budget."""
    prob = solution.problem
    nu0 = prob.params.nu0
    s = 2.0 / r if r != np.inf else 0.0
    pref = (nu0 * r) ** (1.0 / r) if r != np.inf else 1.0
    lhs = pref * tilde_besov_norm(solution.fields, solution.times, r, s, p,
                                  np.inf, j_range=j_range)
    rhs = lp_norm(prob.u0, p)
    if prob.forcing is not None:
        fn = [lp_norm(ScalarField(solution.grid, prob.forcing_at(t)), p)
              for t in solution.times]
        rhs = rhs + np.trapezoid(fn, solution.times)
    return lhs / rhs


def verify_smoothing(solution: Solution, r_list=(1, 2, np.inf),
                     p_list=(2, np.inf), c_univ: float = 1.0, c_F: float = 1.0,
                     ratio_cap: float = 50.0) -> VerificationReport:
    """Gain of 2/r derivatives in the tilde-Besov scale, uniformly in (r, p).

    Raises HypothesisError when the run violates the smallness conditions.
    """
    _require_hypotheses(solution, c_univ, c_F)
    rep = VerificationReport(
        "smoothing",
        ["check_id", "p", "t", "measured", "bound", "fitted_constant", "pass"],
    )
    ratios = {}
    for r in r_list:
        for p in p_list:
            val = smoothing_ratio(solution, r, p)
            ratios[(r, p)] = val
            ok = rep.require(val < ratio_cap, f"r={r} p={p}: ratio {val:.3f}")
            rep.add_row(check_id=f"smoothing-r{r}", p=p, t=float(solution.times[-1]),
                        measured=val, bound=ratio_cap, fitted_constant=val,
                        **{"pass": ok})
    vals = np.array(list(ratios.values()))
    spread = vals.max() / vals.min()
    ok = rep.require(spread < 4.0 * len(vals),
                     f"ratio variation across the sweep: {spread:.2f}")
    rep.add_row(check_id="sweep-spread", p="", t="", measured=spread,
                bound=4.0 * len(vals), fitted_constant=float(vals.max()),
                **{"pass": ok})
    if (1, np.inf) in ratios:
        rep.fitted["holder_c2_ratio"] = ratios[(1, np.inf)]
        rep.notes.append(
            f"special case r=1, p=inf (two full derivatives in C_*^2): "
            f"ratio {ratios[(1, np.inf)]:.4f}")
    rep.fitted["max_ratio"] = float(vals.max())
    return rep


def apriori_ratio(solution: Solution, s: float, r: float, p: float = 2.0,
                  j_range=None) -> float:
    """Besov-data a priori estimate ratio for one (s, r, p) triple."""
    if not -1.0 < s < 1.0:
        raise ValueError(f"s={s} outside (-1, 1)")
    s_gain = s + 2.0 / r if r != np.inf else s
    if not -1.0 < s_gain < 1.0:
        raise ValueError(f"s + 2/r = {s_gain} outside (-1, 1)")
    prob = solution.problem
    nu0 = prob.params.nu0
    pref = (nu0 * r) ** (1.0 / r) if r != np.inf else 1.0
    lhs = pref * tilde_besov_norm(solution.fields, solution.times, r, s_gain, p,
                                  np.inf, j_range=j_range)
    rhs = besov_norm(prob.u0, s, p, np.inf, j_range=j_range)
    if prob.forcing is not None:
        fe = [ScalarField(solution.grid, prob.forcing(t).values)
              for t in solution.times]
        rhs = rhs + tilde_besov_norm(fe, solution.times, 1, s, p, np.inf,
                                     j_range=j_range)
    if prob.forcing_g is not None:
        ge = [ScalarField(solution.grid, prob.forcing_g(t).values)
              for t in solution.times]
        rhs = rhs + tilde_besov_norm(ge, solution.times, np.inf, s_gain - 2.0,
                                     p, np.inf, j_range=j_range) / nu0
    return lhs / rhs


def verify_apriori(solution: Solution, s_list=(-0.5, 0.0, 0.5),
                   r_list=(2, np.inf), p: float = 2.0, c_univ: float = 1.0,
                   c_F: float = 1.0, ratio_cap: float = 50.0) -> VerificationReport:
    """Besov-data estimates over the admissible (s, r) sweep."""
    _require_hypotheses(solution, c_univ, c_F)
    rep = VerificationReport(
        "apriori",
        ["check_id", "p", "t", "measured", "bound", "fitted_constant", "pass"],
    )
    vals = []
    for s in s_list:
        for r in r_list:
            s_gain = s + 2.0 / r if r != np.inf else s
            if not (-1.0 < s < 1.0 and -1.0 < s_gain < 1.0):
                rep.notes.append(f"skip s={s} r={r}: index outside (-1, 1)")
                continue
            val = apriori_ratio(solution, s, r, p)
            vals.append(val)
            ok = rep.require(val < ratio_cap, f"s={s} r={r}: ratio {val:.3f}")
            rep.add_row(check_id=f"apriori-s{s}-r{r}", p=p,
                        t=float(solution.times[-1]), measured=val,
                        bound=ratio_cap, fitted_constant=val, **{"pass": ok})
    if vals:
        rep.fitted["max_ratio"] = float(np.max(vals))
    return rep
