"""Fourier multipliers of the quasi-geostrophic diffusion operator.

The operator splits into a constant-coefficient part and a nonlocal part,

    Gamma = Gamma_L + (nu - nu') F^2 (1 - F^2) Lambda^2,

with Gamma_L = nu d1^2 + nu d2^2 + ((1-F^2) nu + F^2 nu') d3^2 and
Lambda = d3^2 (-Delta_F)^{-1/2}.  All operators act as multipliers on the
discrete frequency grid; the zero mode is fixed (constants pass through
Gamma and Lambda unchanged, and the anisotropic inverse Laplacian projects
it out).
"""

from __future__ import annotations

import numpy as np

from .grid import ScalarField, apply_multiplier, lp_norm, mean
from .params import PhysicalParams
from .report import VerificationReport


def q_symbol(grid, params: PhysicalParams) -> np.ndarray:
    """q(xi) = (|xi|^2/|xi|_F^2)(nu xi1^2 + nu xi2^2 + nu' F^2 xi3^2), q(0) = 0."""
    k1, k2, k3 = grid.freqs()
    xi2 = k1**2 + k2**2 + k3**2
    xiF2 = k1**2 + k2**2 + params.F**2 * k3**2
    poly = params.nu * (k1**2 + k2**2) + params.nu_prime * params.F**2 * k3**2
    q = np.zeros_like(xi2)
    nz = xiF2 > 0
    q[nz] = xi2[nz] / xiF2[nz] * poly[nz]
    return q


def q0_symbol(grid, params: PhysicalParams) -> np.ndarray:
    """Normalized symbol q0 = q / nu0, so that q0(xi) >= |xi|^2."""
    return q_symbol(grid, params) / params.nu0


def gamma_L_symbol(grid, params: PhysicalParams) -> np.ndarray:
    k1, k2, k3 = grid.freqs()
    c3 = (1.0 - params.F**2) * params.nu + params.F**2 * params.nu_prime
    return -(params.nu * (k1**2 + k2**2) + c3 * k3**2)


def lambda_symbol(grid, params: PhysicalParams) -> np.ndarray:
    """Symbol -xi3^2/|xi|_F of the nonlocal operator; negative semi-definite."""
    k1, k2, k3 = grid.freqs()
    xiF = np.sqrt(k1**2 + k2**2 + params.F**2 * k3**2)
    sym = np.zeros_like(xiF)
    nz = xiF > 0
    sym[nz] = -(k3[nz] ** 2) / xiF[nz]
    return sym


def deltaF_inverse_symbol(grid, params: PhysicalParams) -> np.ndarray:
    k1, k2, k3 = grid.freqs()
    xiF2 = k1**2 + k2**2 + params.F**2 * k3**2
    sym = np.zeros_like(xiF2)
    nz = xiF2 > 0
    sym[nz] = -1.0 / xiF2[nz]
    return sym


def apply_gamma(u: ScalarField, params: PhysicalParams) -> ScalarField:
    return apply_multiplier(u, -q_symbol(u.grid, params))


def apply_gamma_L(u: ScalarField, params: PhysicalParams) -> ScalarField:
    return apply_multiplier(u, gamma_L_symbol(u.grid, params))


def apply_lambda_spectral(u: ScalarField, params: PhysicalParams) -> ScalarField:
    return apply_multiplier(u, lambda_symbol(u.grid, params))


def apply_deltaF_inverse(u: ScalarField, params: PhysicalParams) -> ScalarField:
    """Anisotropic inverse Laplacian; the zero mode is projected out."""
    return apply_multiplier(u, deltaF_inverse_symbol(u.grid, params))


def verify_gamma_decomposition(params: PhysicalParams, grid, fields=None,
                               tol: float = 1e-10) -> VerificationReport:
    """Check Gamma = Gamma_L + (nu-nu') F^2 (1-F^2) Lambda^2 two ways.

    Pointwise on the frequency grid as a symbol identity, and on a batch of
    fields by applying both sides independently.
    """
    rep = VerificationReport(
        "gamma-decomposition",
        ["check_id", "case", "measured", "bound", "pass"],
    )
    q = q_symbol(grid, params)
    combo = -gamma_L_symbol(grid, params) - params.nonlocal_coeff * lambda_symbol(grid, params) ** 2
    scale = np.abs(q).max()
    sym_err = float(np.abs(q - combo).max() / scale)
    ok = rep.require(sym_err < tol, f"symbol identity, err={sym_err:.3e}")
    rep.add_row(check_id="symbol-pointwise", case="frequency-grid", measured=sym_err,
                bound=tol, **{"pass": ok})

    q0_err = float(np.abs(params.nu0 * q0_symbol(grid, params) - q).max() / scale)
    ok = rep.require(q0_err < tol, f"nu0*q0 == q, err={q0_err:.3e}")
    rep.add_row(check_id="q0-normalization", case="frequency-grid", measured=q0_err,
                bound=tol, **{"pass": ok})

    for i, u in enumerate(fields or []):
        lhs = apply_gamma(u, params)
        lam = apply_lambda_spectral(u, params)
        rhs = apply_gamma_L(u, params).values + params.nonlocal_coeff * \
            apply_lambda_spectral(lam, params).values
        denom = lp_norm(lhs, 2) or 1.0
        err = lp_norm(ScalarField(u.grid, lhs.values - rhs), 2) / denom
        ok = rep.require(err < tol, f"field {i} relative L2 error {err:.3e}")
        rep.add_row(check_id="field-two-route", case=f"field-{i}", measured=err,
                    bound=tol, **{"pass": ok})

    rep.fitted["max_symbol_err"] = sym_err
    return rep


def verify_symbol_ellipticity(params: PhysicalParams, grid) -> VerificationReport:
    """min(nu,nu')|xi|^2 <= q(xi) <= max(nu,nu')|xi|^2 over the frequency grid."""
    rep = VerificationReport(
        "symbol-ellipticity",
        ["check_id", "case", "measured", "bound", "pass"],
    )
    q = q_symbol(grid, params)
    xi2 = grid.freq_norm2()
    nz = xi2 > 0
    lower = float((q[nz] / xi2[nz]).min())
    upper = float((q[nz] / xi2[nz]).max())
    lo_bound = min(params.nu, params.nu_prime)
    hi_bound = max(params.nu, params.nu_prime)
    ok = rep.require(lower >= lo_bound * (1 - 1e-12), f"lower ellipticity {lower:.6f}")
    rep.add_row(check_id="ellipticity-lower", case="grid", measured=lower,
                bound=lo_bound, **{"pass": ok})
    ok = rep.require(upper <= hi_bound * (1 + 1e-12), f"upper ellipticity {upper:.6f}")
    rep.add_row(check_id="ellipticity-upper", case="grid", measured=upper,
                bound=hi_bound, **{"pass": ok})
    rep.fitted.update(lower=lower, upper=upper)
    return rep


def biot_savart(omega: ScalarField, params: PhysicalParams):
    """Velocity/temperature 4-vector U = (-d2, d1, 0, -F d3) DeltaF^{-1} Omega.

    Returns (U1, U2, U3, U4) with U3 identically zero.  A nonzero mean of
    omega is projected out (the zero mode carries no velocity).
    """
    grid = omega.grid
    k1, k2, k3 = grid.freqs()
    inv = deltaF_inverse_symbol(grid, params)
    oh = np.fft.fftn(omega.values)
    phih = inv * oh
    u1 = ScalarField(grid, np.fft.ifftn(-1j * k2 * phih).real)
    u2 = ScalarField(grid, np.fft.ifftn(1j * k1 * phih).real)
    u3 = ScalarField(grid, np.zeros_like(omega.values))
    u4 = ScalarField(grid, np.fft.ifftn(-params.F * 1j * k3 * phih).real)
    return u1, u2, u3, u4


def reconstruct_omega(U, params: PhysicalParams) -> ScalarField:
    """Omega = d1 U2 - d2 U1 - F d3 U4, the inverse of the velocity law."""
    from .grid import spectral_derivative

    u1, u2, _, u4 = U
    vals = (spectral_derivative(u2, 0).values
            - spectral_derivative(u1, 1).values
            - params.F * spectral_derivative(u4, 2).values)
    return ScalarField(u1.grid, vals)


def verify_biot_savart(params: PhysicalParams, omega: ScalarField,
                       tol: float = 1e-10) -> VerificationReport:
    from .grid import spectral_derivative

    rep = VerificationReport(
        "biot-savart",
        ["check_id", "case", "measured", "bound", "pass"],
    )
    om = omega
    if abs(mean(omega)) > 0:
        om = ScalarField(omega.grid, omega.values - mean(omega))
        rep.notes.append("nonzero mean projected out")
    U = biot_savart(om, params)
    rec = reconstruct_omega(U, params)
    denom = lp_norm(om, np.inf) or 1.0
    err = lp_norm(ScalarField(om.grid, rec.values - om.values), np.inf) / denom
    ok = rep.require(err < tol, f"reconstruction error {err:.3e}")
    rep.add_row(check_id="reconstruction", case="linf", measured=err, bound=tol,
                **{"pass": ok})

    div = (spectral_derivative(U[0], 0).values + spectral_derivative(U[1], 1).values)
    div_err = float(np.abs(div).max() / denom)
    ok = rep.require(div_err < tol, f"horizontal divergence {div_err:.3e}")
    rep.add_row(check_id="divergence-free", case="linf", measured=div_err, bound=tol,
                **{"pass": ok})
    return rep
