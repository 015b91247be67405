"""Test-field constructors: band-limited noise, bumps, windows, velocities."""

from __future__ import annotations

import numpy as np

from .grid import Grid3, ScalarField, gradient_linf, spectral_derivative

C0_ANNULUS = (3.0 / 4.0, 8.0 / 3.0)


def gaussian_bump(grid: Grid3, width: float, amplitude: float = 1.0,
                  center=None, mean_zero: bool = False) -> ScalarField:
    """Periodized Gaussian: nearest images summed so the seam is smooth."""
    x1, x2, x3 = grid.coords(centered=center is None)
    if center is not None:
        x1, x2, x3 = (x - c for x, c in zip(grid.coords(), center))
    L = grid.length
    vals = np.zeros_like(x1)
    for m1 in (-1, 0, 1):
        for m2 in (-1, 0, 1):
            for m3 in (-1, 0, 1):
                r2 = (x1 + m1 * L) ** 2 + (x2 + m2 * L) ** 2 + (x3 + m3 * L) ** 2
                vals += np.exp(-r2 / (2.0 * width**2))
    vals *= amplitude
    if mean_zero:
        vals = vals - vals.mean()
    return ScalarField(grid, vals)


def random_band_limited(grid: Grid3, rng: np.random.Generator, kmin: float,
                        kmax: float, slope: float = 0.0,
                        amplitude: float = 1.0) -> ScalarField:
    """Real field with random phases supported in kmin <= |xi| <= kmax."""
    k1, k2, k3 = grid.freqs()
    kk = np.sqrt(k1**2 + k2**2 + k3**2)
    mask = (kk >= kmin) & (kk <= kmax)
    coeffs = rng.standard_normal(mask.shape) + 1j * rng.standard_normal(mask.shape)
    coeffs = np.where(mask, coeffs, 0.0)
    with np.errstate(divide="ignore"):
        coeffs = np.where(mask, coeffs * np.where(kk > 0, kk, 1.0) ** slope, 0.0)
    vals = np.fft.ifftn(coeffs).real  # taking the real part enforces Hermitian symmetry
    peak = np.abs(vals).max()
    if peak > 0:
        vals = vals * (amplitude / peak)
    return ScalarField(grid, vals)


def annulus_field(grid: Grid3, j: int, rng: np.random.Generator,
                  margin: float = 0.05, amplitude: float = 1.0) -> ScalarField:
    """Random field spectrally supported inside the dyadic annulus 2^j C(0, 3/4, 8/3)."""
    lo = 2.0**j * C0_ANNULUS[0] * (1.0 + margin)
    hi = 2.0**j * C0_ANNULUS[1] * (1.0 - margin)
    grid.check_dyadic_range(j)
    return random_band_limited(grid, rng, lo, hi, amplitude=amplitude)


def pure_mode(grid: Grid3, k_index) -> ScalarField:
    """cos(xi . x) for the lattice frequency with integer index k_index."""
    x1, x2, x3 = grid.coords()
    k = 2.0 * np.pi / grid.length
    ph = k * (k_index[0] * x1 + k_index[1] * x2 + k_index[2] * x3)
    return ScalarField(grid, np.cos(ph))


def smoothstep(t: np.ndarray) -> np.ndarray:
    """C^inf transition equal to 0 for t <= 0 and 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def poly_step(t: np.ndarray) -> np.ndarray:
    """C^3 septic transition; spectrally tamer than the C^inf bump on coarse grids."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def window(grid: Grid3, inner: float = 0.22, outer: float = 0.47) -> np.ndarray:
    """Radial cutoff: 1 inside |x - c| <= inner*L, 0 beyond outer*L."""
    x1, x2, x3 = grid.coords(centered=True)
    r = np.sqrt(x1**2 + x2**2 + x3**2)
    t = (outer * grid.length - r) / ((outer - inner) * grid.length)
    return poly_step(t)


def _curl(grid: Grid3, a1, a2, a3):
    def d(v, ax):
        return spectral_derivative(ScalarField(grid, v), ax).values

    return (d(a3, 1) - d(a2, 2), d(a1, 2) - d(a3, 0), d(a2, 0) - d(a1, 1))


def divergence_free_velocity(grid: Grid3, rng: np.random.Generator,
                             kmax: float, grad_linf: float = 1.0,
                             windowed: bool = True):
    """Random solenoidal velocity built as the spectral curl of a potential.

    Windowing the potential keeps the flow compactly supported in the box
    interior while the curl keeps the divergence at round-off level.  The
    field is rescaled so max_x |grad v| equals grad_linf.
    """
    pots = [random_band_limited(grid, rng, 0.5, kmax).values for _ in range(3)]
    if windowed:
        w = window(grid)
        pots = [w * p for p in pots]
    v = _curl(grid, *pots)
    g = max(gradient_linf(ScalarField(grid, c)) for c in v)
    scale = grad_linf / g if g > 0 else 0.0
    return tuple(ScalarField(grid, c * scale) for c in v)


def band_limit(values: np.ndarray, grid: Grid3, kmax: float) -> np.ndarray:
    """Project samples onto frequencies |xi| <= kmax."""
    fh = np.fft.fftn(values)
    fh[np.sqrt(grid.freq_norm2()) > kmax] = 0.0
    return np.fft.ifftn(fh).real


def leray_project(v):
    """Remove the gradient part so the sampled field is divergence-free."""
    grid = v[0].grid
    k1, k2, k3 = grid.freqs()
    kk2 = k1**2 + k2**2 + k3**2
    vh = [np.fft.fftn(c.values) for c in v]
    dot = k1 * vh[0] + k2 * vh[1] + k3 * vh[2]
    proj = np.where(kk2 > 0, dot / np.where(kk2 > 0, kk2, 1.0), 0.0)
    out = [np.fft.ifftn(vh[i] - proj * k).real for i, k in enumerate((k1, k2, k3))]
    return tuple(ScalarField(grid, c) for c in out)


def rotation_velocity(grid: Grid3, omega: float = 1.0, windowed: bool = True,
                      kmax: float | None = None):
    """Rigid horizontal rotation about the box center, windowed to be periodic-safe.

    An axisymmetric profile times (-x2, x1, 0) is divergence-free pointwise;
    sampling, band-limiting and re-projecting keeps the discrete field
    exactly solenoidal while it equals the rigid rotation wherever the
    window is flat.
    """
    x1, x2, x3 = grid.coords(centered=True)
    if windowed:
        r = np.sqrt(x1**2 + x2**2 + x3**2)
        s = poly_step((0.47 * grid.length - r) / (0.27 * grid.length))
    else:
        s = np.ones_like(x1)
    kmax = kmax if kmax is not None else 0.32 * grid.nyquist
    v1 = band_limit(-omega * x2 * s, grid, kmax)
    v2 = band_limit(omega * x1 * s, grid, kmax)
    v3 = np.zeros_like(v1)
    return leray_project(tuple(ScalarField(grid, c) for c in (v1, v2, v3)))


def shear_velocity(grid: Grid3, amplitude: float = 1.0):
    """Periodic divergence-free shear, nonzero everywhere (not windowed)."""
    x1, x2, x3 = grid.coords()
    k = 2.0 * np.pi / grid.length
    v1 = amplitude * np.sin(k * x2) * np.cos(k * x3)
    v2 = amplitude * 0.5 * np.sin(k * x3) * np.cos(k * x1)
    v3 = amplitude * 0.25 * np.sin(k * x1) * np.cos(k * x2)
    return tuple(ScalarField(grid, c) for c in (v1, v2, v3))


def divergence_linf(v) -> float:
    grid = v[0].grid
    div = sum(spectral_derivative(v[i], i).values for i in range(3))
    return float(np.abs(div).max())


def dilated_velocity_family(grid: Grid3, rng: np.random.Generator, j_list,
                            grad_linf: float = 1.0, j_base: int = 2,
                            band=(0.4, 0.6)):
    """Divergence-free velocities that are exact dyadic dilations of each other.

    The member at index j carries the base spectrum at 2^{j - j_base}-scaled
    lattice frequencies with amplitudes divided by the same factor, so
    max |grad v_j| is identical across the family while higher derivatives
    grow like 2^{(k-1)(j - j_base)}.  The member-j band is band * 2^j, just
    under the cutoff of the low-pass S_{j-1}; the truncation factor
    chi(|xi|/2^j) is the same for every member, so the advecting velocities
    remain exact mutual dilations.  These fields are periodic and
    unwindowed; scaling checks sample the box interior.
    """
    j_list = sorted(j_list)
    if min(j_list) < j_base:
        raise ValueError(f"family members need j >= j_base={j_base}")
    n = grid.n
    kk = np.sqrt(grid.freq_norm2())
    lo, hi = band[0] * 2.0**j_base, band[1] * 2.0**j_base
    if hi * 2.0 ** (max(j_list) - j_base) > grid.nyquist:
        raise ValueError("base band dilates past the Nyquist frequency")
    mask0 = (kk >= lo) & (kk <= hi)
    if not mask0.any():
        raise ValueError("frequency lattice too coarse for the base band")
    pot0 = [np.where(mask0, rng.standard_normal(mask0.shape)
                     + 1j * rng.standard_normal(mask0.shape), 0.0)
            for _ in range(3)]
    idx = np.nonzero(mask0)
    out = {}
    for j in j_list:
        fac = 2 ** (j - j_base)
        comps = []
        for a in pot0:
            c = np.zeros_like(a)
            scaled = tuple(((ix * fac) % n) for ix in idx)
            c[scaled] = a[idx] / fac
            comps.append(np.fft.ifftn(c).real)
        v = _curl(grid, *comps)
        scale = grad_linf / max(gradient_linf(ScalarField(grid, c)) for c in v)
        out[j] = tuple(ScalarField(grid, c * scale) for c in v)
    return out
