"""Named verification checks wired to reproducible configurations.

Every check consumes a RunConfig and a deterministic per-check random
stream, returns VerificationReports, and is registered in CHECKS so the
command line can run single checks, suites and parameter sweeps.  Expensive
artifacts (flow families) are built lazily once per run context and shared
between checks.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid3, ScalarField
from .params import PhysicalParams
from .report import VerificationReport


@dataclass
class RunConfig:
    nu: float = 1.0
    nu_prime: float = 2.0
    F: float = 0.5
    n: int = 64
    length: float = 2.0 * np.pi
    seed: int = 1234
    output_dir: str = "qg3-out"
    t_final: float = 0.5
    dt: float = 0.02
    velocity_amp: float = 0.15
    forcing_amp: float = 0.2
    quad_n_radii: int = 32
    quad_n_polar: int = 12
    quad_n_azimuth: int = 24
    quad_r_min: float = 1.0    # multiples of the grid spacing
    quad_r_max: float = 0.25   # multiples of the box length
    sweep_j: int | None = None
    sweep_V: float | None = None

    def quadrature(self):
        from .kernel import QuadratureSettings

        return QuadratureSettings(r_min_factor=self.quad_r_min,
                                  r_max_factor=self.quad_r_max,
                                  n_radii=self.quad_n_radii,
                                  n_polar=self.quad_n_polar,
                                  n_azimuth=self.quad_n_azimuth)

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams(self.nu, self.nu_prime, self.F)

    def grid(self, n=None, length=None) -> Grid3:
        return Grid3(n or self.n, length or self.length)

    def rng(self, check: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(check.encode())])


class RunContext:
    """Lazy shared artifacts for one suite invocation."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._cache = {}

    def flow_family(self):
        if "flows" not in self._cache:
            from .fields import dilated_velocity_family
            from .flow import integrate_flow

            grid = Grid3(64, 2 * np.pi)
            rng = self.config.rng("flow-family")
            vels = dilated_velocity_family(grid, rng, j_list=(2, 3, 4))
            pairs = [(2, 0.05), (2, 0.1), (2, 0.2), (3, 0.1), (4, 0.1)]
            if self.config.sweep_j is not None:
                pairs = [(self.config.sweep_j, 0.1)]
                vels = dilated_velocity_family(grid, rng,
                                               j_list=(self.config.sweep_j,),
                                               j_base=min(2, self.config.sweep_j))
            if self.config.sweep_V is not None:
                pairs = [(j, self.config.sweep_V) for j, _ in pairs]
            self._cache["flows"] = {
                (j, V): integrate_flow(vels[j], j=j, t_final=V) for j, V in pairs}
        return self._cache["flows"]

    def commutator_family(self):
        if "cflows" not in self._cache:
            from .fields import annulus_field, dilated_velocity_family
            from .flow import integrate_flow

            grid = Grid3(64, np.pi)
            rng = self.config.rng("commutator-family")
            vels = dilated_velocity_family(grid, rng, j_list=(2, 3, 4),
                                           band=(0.4, 0.7))
            flows = {}
            for j, V in [(2, 0.1), (3, 0.05), (3, 0.1), (3, 0.2), (4, 0.1)]:
                flows[(j, V)] = integrate_flow(vels[j], j=j, t_final=V)
            blocks = {j: annulus_field(grid, j, self.config.rng("blocks"))
                      for j in (2, 3, 4)}
            self._cache["cflows"] = (grid, flows, blocks)
        return self._cache["cflows"]

    def solution(self):
        if "solution" not in self._cache:
            from .fields import divergence_free_velocity, random_band_limited
            from .solver import TdqgProblem, solve_tdqg

            cfg = self.config
            grid = Grid3(32, 2 * np.pi)
            rng = cfg.rng("solver-run")
            u0 = random_band_limited(grid, rng, 1, 5.0)
            v = divergence_free_velocity(grid, rng, 5.0, grad_linf=1.0)
            scale = cfg.velocity_amp / max(np.abs(c.values).max() for c in v)
            v = tuple(ScalarField(grid, c.values * scale) for c in v)
            f_e = random_band_limited(grid, rng, 1, 5.0)

            def forcing(t, base=f_e.values, amp=cfg.forcing_amp):
                return ScalarField(grid, amp * np.cos(t) * base)

            prob = TdqgProblem(params=cfg.params, u0=u0, velocity=v,
                               forcing=forcing, t_final=cfg.t_final, dt=cfg.dt)
            self._cache["solution"] = solve_tdqg(prob)
        return self._cache["solution"]


# ---------------------------------------------------------------------------
# individual checks


def check_transform_roundtrip(ctx: RunContext):
    from .fields import random_band_limited
    from .grid import inverse_transform, lp_norm, transform

    cfg = ctx.config
    grid = cfg.grid(n=32)
    rng = cfg.rng("transform-roundtrip")
    rep = VerificationReport(
        "transform-roundtrip", ["check_id", "case", "measured", "bound", "pass"])
    f = random_band_limited(grid, rng, 1, grid.nyquist / 2)
    back = inverse_transform(transform(f))
    err = float(np.abs(back.values - f.values).max())
    ok = rep.require(err < 1e-12, f"roundtrip max error {err:.2e}")
    rep.add_row(check_id="roundtrip", case="random", measured=err, bound=1e-12,
                **{"pass": ok})
    l2 = lp_norm(f, 2)
    via = float(np.sqrt((np.abs(np.fft.fftn(f.values)) ** 2).sum()
                        / grid.n**3 * grid.spacing**3))
    rel = abs(l2 - via) / l2
    ok = rep.require(rel < 1e-10, f"Parseval relative error {rel:.2e}")
    rep.add_row(check_id="parseval", case="random", measured=rel, bound=1e-10,
                **{"pass": ok})
    return [rep]


def check_gamma_decomposition(ctx: RunContext):
    from .fields import random_band_limited
    from .symbols import verify_gamma_decomposition, verify_symbol_ellipticity

    cfg = ctx.config
    grid = cfg.grid()
    rng = cfg.rng("gamma-decomposition")
    fields = [random_band_limited(grid, rng, 1, grid.nyquist / 3) for _ in range(3)]
    reps = [verify_gamma_decomposition(cfg.params, grid, fields),
            verify_symbol_ellipticity(cfg.params, grid)]
    for nu, nup, F in [(1.0, 1.0, 0.5), (1.0, 2.0, 1.0), (3.0, 1.0, 0.25),
                       (0.5, 5.0, 0.75)]:
        reps.append(verify_gamma_decomposition(PhysicalParams(nu, nup, F), grid,
                                               fields[:1]))
        reps[-1].name = f"gamma-decomposition-nu{nu}-nup{nup}-F{F}"
    return reps


def check_biot_savart(ctx: RunContext):
    from .fields import random_band_limited
    from .symbols import verify_biot_savart

    cfg = ctx.config
    grid = cfg.grid(n=32)
    omega = random_band_limited(grid, cfg.rng("biot-savart"), 1, grid.nyquist / 3)
    return [verify_biot_savart(cfg.params, omega)]


def check_kernel_l1(ctx: RunContext):
    from .semigroup import verify_kernel_claims

    cfg = ctx.config
    grid = Grid3(128, 64.0)
    return [verify_kernel_claims(cfg.params, grid)]


def check_kernel_scaling(ctx: RunContext):
    from .semigroup import verify_scaling_law

    return [verify_scaling_law(ctx.config.params, Grid3(128, 64.0))]


def check_semigroup_bounds(ctx: RunContext):
    from .semigroup import verify_semigroup_bounds

    cfg = ctx.config
    grid = cfg.grid(n=64, length=2 * np.pi)
    j_list = (cfg.sweep_j,) if cfg.sweep_j is not None else (0, 1, 2, 3)
    return [verify_semigroup_bounds(cfg.params, grid, p_list=(2, np.inf),
                                    j_list=j_list, rng=cfg.rng("semigroup"))]


def check_partition_unity(ctx: RunContext):
    from .lp import DyadicPartition

    grid = ctx.config.grid(n=64, length=2 * np.pi)
    part = DyadicPartition(grid)
    rep = VerificationReport(
        "partition-unity", ["check_id", "case", "measured", "bound", "pass"])
    res = part.partition_residual(0, part.cover_index())
    ok = rep.require(res < 1e-10, f"nonhomogeneous partition residual {res:.2e}")
    rep.add_row(check_id="partition", case="grid", measured=res, bound=1e-10,
                **{"pass": ok})
    res_h = part.homogeneous_residual(-3, part.cover_index())
    ok = rep.require(res_h < 1e-10, f"homogeneous partition residual {res_h:.2e}")
    rep.add_row(check_id="partition-homogeneous", case="resolved-annulus",
                measured=res_h, bound=1e-10, **{"pass": ok})
    return [rep]


def check_besov_fd(ctx: RunContext):
    from .fields import annulus_field
    from .lp import besov_norm, fd_besov_norm

    cfg = ctx.config
    grid = cfg.grid(n=64, length=2 * np.pi)
    rep = VerificationReport(
        "besov-fd", ["check_id", "case", "measured", "bound", "pass"])
    for s, order in ((0.3, 1), (0.5, 1), (0.7, 1), (1.0, 2)):
        ratios = []
        for j in (0, 1, 2, 3):
            u = annulus_field(grid, j, cfg.rng(f"besov-fd-{j}"))
            fd = fd_besov_norm(u, s, 2, 1, order=order)
            dy = besov_norm(u, s, 2, 1, homogeneous=True, j_range=(-2, 5))
            ratios.append(fd / dy)
        spread = max(ratios) / min(ratios)
        ok = rep.require(spread < 4.0, f"s={s}: fd/dyadic spread {spread:.2f}")
        rep.add_row(check_id=f"fd-ratio-s{s}", case=f"order-{order}",
                    measured=spread, bound=4.0, **{"pass": ok})
    return [rep]


def check_besov_tilde(ctx: RunContext):
    from .fields import random_band_limited
    from .lp import tilde_besov_norm, time_besov_norm

    cfg = ctx.config
    grid = cfg.grid(n=32)
    rng = cfg.rng("besov-tilde")
    times = np.linspace(0.0, 1.0, 6)
    series = [random_band_limited(grid, rng, 1, 10) for _ in times]
    rep = VerificationReport(
        "besov-tilde", ["check_id", "case", "measured", "bound", "pass"])
    for rho, r in ((2, np.inf), (1, 2)):
        tilde = tilde_besov_norm(series, times, rho, 0.3, 2, r)
        plain = time_besov_norm(series, times, rho, 0.3, 2, r)
        if r >= rho:
            ok = rep.require(tilde <= plain * (1 + 1e-10),
                             f"r={r} >= rho={rho}: tilde <= plain")
        else:
            ok = rep.require(tilde >= plain * (1 - 1e-10),
                             f"r={r} <= rho={rho}: tilde >= plain")
        rep.add_row(check_id=f"minkowski-r{r}-rho{rho}", case="random-series",
                    measured=tilde / plain, bound=1.0, **{"pass": ok})
    return [rep]


def check_bony(ctx: RunContext):
    from .fields import random_band_limited
    from .lp import bony_decompose, product_is_resolved

    cfg = ctx.config
    grid = cfg.grid(n=32)
    rng = cfg.rng("bony")
    u = random_band_limited(grid, rng, 1, 6)
    v = random_band_limited(grid, rng, 1, 6)
    rep = VerificationReport(
        "bony", ["check_id", "case", "measured", "bound", "pass"])
    ok = rep.require(product_is_resolved(u, v), "product resolved on the grid")
    rep.add_row(check_id="aliasing", case="bandwidth", measured="", bound="",
                **{"pass": ok})
    tuv, tvu, rem = bony_decompose(u, v)
    total = tuv.values + tvu.values + rem.values
    err = float(np.abs(total - u.values * v.values).max()
                / np.abs(u.values * v.values).max())
    ok = rep.require(err < 1e-8, f"three-part reconstruction {err:.2e}")
    rep.add_row(check_id="reconstruction", case="random", measured=err, bound=1e-8,
                **{"pass": ok})
    return [rep]


def check_lambda_oracle(ctx: RunContext):
    from .kernel import verify_lambda_oracle

    cfg = ctx.config
    grid = Grid3(64, 4 * np.pi)
    return [verify_lambda_oracle(cfg.params, grid, settings=cfg.quadrature())]


def check_difference_forms(ctx: RunContext):
    from .kernel import verify_difference_forms

    return [verify_difference_forms(ctx.config.params, Grid3(32, 4 * np.pi),
                                    rng=ctx.config.rng("difference-forms"))]


def check_leibniz(ctx: RunContext):
    from .fields import gaussian_bump, random_band_limited
    from .kernel import QuadratureSettings, verify_leibniz, verify_M_estimate

    cfg = ctx.config
    grid = Grid3(64, 4 * np.pi)
    f = gaussian_bump(grid, width=1.2)
    g = gaussian_bump(grid, width=1.6,
                      center=(grid.length / 2 + 0.7, grid.length / 2,
                              grid.length / 2))
    reps = [verify_leibniz(f, g, cfg.params)]
    small = Grid3(32, 4 * np.pi)
    rng_names = ("leibniz-a", "leibniz-b", "leibniz-c")
    pairs = [(random_band_limited(small, cfg.rng(nm), 0.5, 2.5),
              random_band_limited(small, cfg.rng(nm + "x"), 0.5, 2.5))
             for nm in rng_names]
    reps.append(verify_M_estimate(pairs, cfg.params,
                                  QuadratureSettings(n_radii=16, n_polar=6,
                                                     n_azimuth=10)))
    return reps


def check_besov1_interp(ctx: RunContext):
    from .fields import annulus_field
    from .kernel import besov1_interpolation

    grid = ctx.config.grid(n=64, length=2 * np.pi)
    u = annulus_field(grid, 1, ctx.config.rng("besov1"))
    return [besov1_interpolation(u)]


def check_flow_bounds(ctx: RunContext):
    from .flow import verify_flow_bounds

    return [verify_flow_bounds(list(ctx.flow_family().values()))]


def check_mx_suite(ctx: RunContext):
    from .flow import evaluate_mx, verify_mx_properties

    cfg = ctx.config
    flows = ctx.flow_family()
    rng = cfg.rng("mx-suite")
    grid = Grid3(32, 2 * np.pi)
    pairs = []
    for (j, V), fl in sorted(flows.items()):
        if V > 0.1 and len(flows) > 1:
            continue
        radii = np.geomspace(grid.spacing / 8, grid.length / 4, 24)
        dirs = rng.standard_normal((24, 4, 3))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        ys = (radii[:, None, None] * dirs).reshape(-1, 3)
        c = grid.length / 2
        xs = c + rng.uniform(-grid.length / 8, grid.length / 8, size=(8, 3))
        pairs.append((fl, evaluate_mx(fl, xs, ys, cfg.F)))
    return [verify_mx_properties(pairs, cfg.F)]


def check_kernel_diff_bounds(ctx: RunContext):
    from .kernel import verify_kernel_difference_bounds

    cfg = ctx.config
    flows = ctx.flow_family()
    fam = [fl for (j, V), fl in sorted(flows.items()) if j == 2] or \
        list(flows.values())
    return [verify_kernel_difference_bounds(cfg.params, fam, F_C=0.5,
                                            rng=cfg.rng("kernel-diff"))]


def check_commutator_scaling(ctx: RunContext):
    from .commutators import verify_commutator_scaling
    from .flow import fitted_flow_constant

    cfg = ctx.config
    _, flows, blocks = ctx.commutator_family()
    c_fit = max(fitted_flow_constant(list(flows.values())), 0.1)
    flows_by_j = {j: flows[(j, 0.1)] for j in (2, 3, 4)}
    flows_by_v = {V: flows[(3, V)] for V in (0.05, 0.1, 0.2)}
    return [verify_commutator_scaling(cfg.params, flows_by_j, flows_by_v, blocks,
                                      c_flow=c_fit)]


def check_commutator_twopath(ctx: RunContext):
    from .commutators import verify_two_path
    from .flow import fitted_flow_constant
    from .kernel import QuadratureSettings

    cfg = ctx.config
    grid, flows, blocks = ctx.commutator_family()
    fl = flows[(3, 0.1)]
    c_fit = max(fitted_flow_constant([fl]), 0.1)
    rng = cfg.rng("two-path")
    c = grid.length / 2
    x = c + rng.uniform(-grid.length / 6, grid.length / 6, size=(24, 3))
    st = QuadratureSettings(r_max_factor=0.45, n_radii=32, n_polar=12,
                            n_azimuth=20)
    return [verify_two_path(cfg.params, fl, blocks[3], x, st, c_flow=c_fit)]


def check_commutator_degenerate(ctx: RunContext):
    from .commutators import verify_degenerate_cases

    grid, flows, _ = ctx.commutator_family()
    return [verify_degenerate_cases(grid, flows[(3, 0.1)],
                                    rng=ctx.config.rng("degenerate"))]


def check_remainder_rj(ctx: RunContext):
    from .commutators import verify_remainder_bounds
    from .fields import divergence_free_velocity, random_band_limited

    cfg = ctx.config
    grid = cfg.grid(n=64, length=np.pi)
    rng = cfg.rng("remainder")
    v = divergence_free_velocity(grid, rng, kmax=6.0, grad_linf=1.0)
    fields = [random_band_limited(grid, cfg.rng(f"remainder-{s}"), 2, 24)
              for s in range(2)]
    return [verify_remainder_bounds(v, fields, j_list=(2, 3, 4))]


def check_lp_estimate(ctx: RunContext):
    from .solver import verify_lp_estimate

    return [verify_lp_estimate(ctx.solution(), p_list=(2, 4, np.inf))]


def check_smoothing(ctx: RunContext):
    from .solver import verify_smoothing

    return [verify_smoothing(ctx.solution())]


def check_apriori(ctx: RunContext):
    from .solver import verify_apriori

    return [verify_apriori(ctx.solution())]


def check_qg_energy(ctx: RunContext):
    from .fields import random_band_limited
    from .grid import lp_norm
    from .solver import solve_qg

    cfg = ctx.config
    grid = Grid3(32, 2 * np.pi)
    om = random_band_limited(grid, cfg.rng("qg-energy"), 1, 5.0)
    om = ScalarField(grid, 0.3 * (om.values - om.values.mean()))
    sol = solve_qg(om, cfg.params, t_final=0.3, dt=0.01)
    rep = VerificationReport(
        "qg-energy", ["check_id", "case", "measured", "bound", "pass"])
    energies = [lp_norm(f, 2) for f in sol.fields]
    worst = max(b / a for a, b in zip(energies, energies[1:]))
    ok = rep.require(worst <= 1 + 1e-6, f"energy nonincreasing: worst step {worst:.2e}")
    rep.add_row(check_id="energy", case="unforced", measured=worst, bound=1.0,
                **{"pass": ok})
    rep.fitted["v_l6"] = sol.v_l6
    return [rep]


CHECKS = {
    "transform-roundtrip": check_transform_roundtrip,
    "gamma-decomposition": check_gamma_decomposition,
    "biot-savart": check_biot_savart,
    "kernel-l1": check_kernel_l1,
    "kernel-scaling": check_kernel_scaling,
    "semigroup-bounds": check_semigroup_bounds,
    "partition-unity": check_partition_unity,
    "besov-fd": check_besov_fd,
    "besov-tilde": check_besov_tilde,
    "bony": check_bony,
    "lambda-oracle": check_lambda_oracle,
    "difference-forms": check_difference_forms,
    "leibniz": check_leibniz,
    "besov1-interp": check_besov1_interp,
    "flow-bounds": check_flow_bounds,
    "mx-suite": check_mx_suite,
    "kernel-diff-bounds": check_kernel_diff_bounds,
    "commutator-scaling": check_commutator_scaling,
    "commutator-twopath": check_commutator_twopath,
    "commutator-degenerate": check_commutator_degenerate,
    "remainder-rj": check_remainder_rj,
    "lp-estimate": check_lp_estimate,
    "smoothing": check_smoothing,
    "apriori": check_apriori,
    "qg-energy": check_qg_energy,
}

FAST_SUITE = [
    "transform-roundtrip", "gamma-decomposition", "biot-savart",
    "partition-unity", "besov-tilde", "bony", "besov1-interp",
    "remainder-rj", "lp-estimate", "qg-energy",
]


def run_suite(config: RunConfig, names) -> tuple[list[VerificationReport], bool]:
    ctx = RunContext(config)
    reports = []
    all_ok = True
    for name in names:
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}")
        for rep in CHECKS[name](ctx):
            reports.append(rep)
            all_ok = all_ok and rep.passed
    return reports, all_ok


def sweep(config: RunConfig, axis: str, values, check: str):
    """Run one check across an axis; returns (value, reports, passed) rows."""
    rows = []
    for v in values:
        if axis == "F":
            cfg = replace(config, F=float(v))
        elif axis == "nu_ratio":
            cfg = replace(config, nu_prime=config.nu * float(v))
        elif axis == "j":
            cfg = replace(config, sweep_j=int(v))
        elif axis == "V":
            cfg = replace(config, sweep_V=float(v))
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
        reports, ok = run_suite(cfg, [check])
        rows.append((v, reports, ok))
    return rows
