"""Dyadic decomposition, Besov / tilde-Besov norms, finite-difference
characterizations and the paraproduct splitting of a product.

One engine serves the homogeneous and nonhomogeneous decompositions: on a
periodic grid they differ only in whether the low frequencies are kept as a
single cutoff block or spread over negative dyadic indices.  Homogeneous
norms are meaningful here only for mean-zero fields (the grid has no
j -> -infinity limit to kill the low-frequency tail).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import smoothstep
from .grid import Grid3, ScalarField, lp_norm

CHI_FLAT = 3.0 / 4.0   # chi == 1 inside this radius
CHI_SUPP = 4.0 / 3.0   # chi == 0 outside this radius


def chi_profile(r):
    """Smooth radial cutoff: 1 on [0, 3/4], 0 beyond 4/3, monotone between."""
    r = np.asarray(r, dtype=np.float64)
    return smoothstep((CHI_SUPP - r) / (CHI_SUPP - CHI_FLAT))


def phi_profile(r):
    """Annulus bump phi(r) = chi(r/2) - chi(r), supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=np.float64)
    return chi_profile(r / 2.0) - chi_profile(r)


@dataclass(frozen=True)
class DyadicPartition:
    """chi/phi multiplier family evaluated on a fixed frequency grid."""

    grid: Grid3

    def freq_radius(self) -> np.ndarray:
        return np.sqrt(self.grid.freq_norm2())

    def chi(self, j: int = 0) -> np.ndarray:
        return chi_profile(self.freq_radius() / 2.0**j)

    def phi(self, j: int) -> np.ndarray:
        return phi_profile(self.freq_radius() / 2.0**j)

    def cover_index(self) -> int:
        """Smallest j such that chi(2^-(j+1) xi) == 1 over the whole grid."""
        corner = np.sqrt(3.0) * self.grid.nyquist
        return int(np.ceil(np.log2(corner / CHI_FLAT))) - 1

    def partition_residual(self, j_min: int, j_max: int) -> float:
        """max | chi(2^-j_min xi) + sum_{j_min<=l<=j_max} phi(2^-l xi) - 1 |."""
        total = self.chi(j_min)
        for l in range(j_min, j_max + 1):
            total = total + self.phi(l)
        return float(np.abs(total - 1.0).max())

    def homogeneous_residual(self, j_min: int, j_max: int) -> float:
        """max over resolved annulus of | sum_l phi(2^-l xi) - 1 |, xi != 0."""
        r = self.freq_radius()
        total = np.zeros_like(r)
        for l in range(j_min, j_max + 1):
            total = total + phi_profile(r / 2.0**l)
        resolved = (r >= CHI_SUPP * 2.0**j_min) & (r <= CHI_FLAT * 2.0 ** (j_max + 1))
        if not resolved.any():
            return np.nan
        return float(np.abs(total[resolved] - 1.0).max())


@dataclass
class DyadicDecomposition:
    """Blocks Delta_j u (and the low cutoff for the nonhomogeneous flavor)."""

    field: ScalarField
    partition: DyadicPartition
    blocks: dict = field(default_factory=dict, repr=False)
    j_min: int = 0
    j_max: int = 0
    homogeneous: bool = False

    def block(self, j: int) -> ScalarField:
        if j in self.blocks:
            return self.blocks[j]
        zero = np.zeros_like(self.field.values)
        return ScalarField(self.field.grid, zero)

    def low_cut(self, j: int) -> ScalarField:
        """S_j u = chi(2^-j D) u."""
        fh = np.fft.fftn(self.field.values)
        return ScalarField(self.field.grid,
                           np.fft.ifftn(self.partition.chi(j) * fh).real)

    def reconstruct(self) -> ScalarField:
        total = sum(b.values for b in self.blocks.values())
        return ScalarField(self.field.grid, total)


def decompose(u: ScalarField, j_range=None, homogeneous: bool = False) -> DyadicDecomposition:
    """Split u into dyadic blocks.

    Nonhomogeneous: block -1 is chi(D) u and blocks 0..j_max use phi.
    Homogeneous: all blocks use phi over the given j_range.  The default
    j_max covers the corner of the frequency cube so reconstruction is exact
    to round-off.
    """
    part = DyadicPartition(u.grid)
    cover = part.cover_index()
    if j_range is None:
        j_range = (-8, cover) if homogeneous else (0, cover)
    j_min, j_max = j_range
    if 2.0**j_max * CHI_FLAT > u.grid.nyquist * np.sqrt(3.0) * 2.0:
        raise ValueError(f"j_max={j_max} far beyond the resolved range")
    fh = np.fft.fftn(u.values)
    blocks = {}
    if not homogeneous:
        blocks[-1] = ScalarField(u.grid, np.fft.ifftn(part.chi(j_min) * fh).real)
    for j in range(j_min, j_max + 1):
        blocks[j] = ScalarField(u.grid, np.fft.ifftn(part.phi(j) * fh).real)
    return DyadicDecomposition(u, part, blocks, j_min, j_max, homogeneous)


def block_field(u: ScalarField, j: int) -> ScalarField:
    """Single dyadic block Delta_j u without building the whole decomposition."""
    part = DyadicPartition(u.grid)
    fh = np.fft.fftn(u.values)
    return ScalarField(u.grid, np.fft.ifftn(part.phi(j) * fh).real)


def low_cut_field(u: ScalarField, j: int) -> ScalarField:
    """S_j u = chi(2^-j D) u."""
    part = DyadicPartition(u.grid)
    fh = np.fft.fftn(u.values)
    return ScalarField(u.grid, np.fft.ifftn(part.chi(j) * fh).real)


def _lr_combine(weights, values, r):
    values = np.asarray(values, dtype=np.float64)
    if r == np.inf:
        return float(values.max(initial=0.0))
    return float((np.asarray(weights) * values**r).sum() ** (1.0 / r))


def besov_norm(u: ScalarField, s: float, p: float, r: float,
               homogeneous: bool = False, j_range=None) -> float:
    """ell^r over j of 2^{js} ||Delta_j u||_p."""
    dec = decompose(u, j_range=j_range, homogeneous=homogeneous)
    js = sorted(dec.blocks)
    vals = [2.0 ** (j * s) * lp_norm(dec.blocks[j], p) for j in js]
    return _lr_combine(np.ones(len(vals)), vals, r)


def _time_lr(series_norms: np.ndarray, times: np.ndarray, rho: float) -> float:
    if rho == np.inf:
        return float(series_norms.max())
    return float(np.trapezoid(series_norms**rho, times) ** (1.0 / rho))


def tilde_besov_norm(series, times, rho: float, s: float, p: float, r: float,
                     homogeneous: bool = False, j_range=None) -> float:
    """Chemin-Lerner norm: time L^rho per block first, then the ell^r sum."""
    times = np.asarray(times, dtype=np.float64)
    decs = [decompose(u, j_range=j_range, homogeneous=homogeneous) for u in series]
    js = sorted(decs[0].blocks)
    vals = []
    for j in js:
        traj = np.array([lp_norm(d.blocks[j], p) for d in decs])
        vals.append(2.0 ** (j * s) * _time_lr(traj, times, rho))
    return _lr_combine(np.ones(len(vals)), vals, r)


def time_besov_norm(series, times, rho: float, s: float, p: float, r: float,
                    homogeneous: bool = False, j_range=None) -> float:
    """Plain L^rho_T of the Besov norm (time integral outside the j-sum)."""
    times = np.asarray(times, dtype=np.float64)
    traj = np.array([besov_norm(u, s, p, r, homogeneous, j_range) for u in series])
    return _time_lr(traj, times, rho)


FD_DIRECTIONS = np.array(
    [(1, 0, 0), (0, 1, 0), (0, 0, 1),
     (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
     (1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1)], dtype=np.int64)
# 13 face/edge/corner directions; the antipodes give identical L^p differences


def _fd_shell_values(u: ScalarField, order: int, n_radii: int, p: float):
    """||difference||_p on lattice-snapped shells, per (direction, radius)."""
    grid = u.grid
    h = grid.spacing
    out = []
    for d in FD_DIRECTIONS:
        dlen = np.linalg.norm(d) * h
        m_max = max(int(np.floor(grid.length / 4.0 / dlen)), 2)
        steps = np.unique(np.round(np.geomspace(2, m_max, n_radii)).astype(int))
        radii = steps * dlen
        norms = []
        for m in steps:
            shift = tuple(-int(m) * int(c) for c in d)  # tau_{-y} u(x) = u(x + y)
            fwd = np.roll(u.values, shift, axis=(0, 1, 2))
            if order == 1:
                diff = fwd - u.values
            else:
                bwd = np.roll(u.values, tuple(-s for s in shift), axis=(0, 1, 2))
                diff = fwd + bwd - 2.0 * u.values
            norms.append(lp_norm(ScalarField(grid, diff), p))
        out.append((radii, np.array(norms)))
    return out


def fd_besov_norm(u: ScalarField, s: float, p: float, r: float,
                  order: int = 1, n_radii: int = 24) -> float:
    """Translation-difference Besov norm by shell quadrature.

    Order 1 uses ||tau_{-y} u - u||_p / |y|^s (s in (0,1)); order 2 uses the
    symmetric second difference and admits s in (0,2), in particular s = 1.
    The y-integral (measure dy/|y|^3) is discretized on lattice-snapped
    log-spaced radii and the 26 cube directions.
    """
    if order == 1 and not 0 < s < 1:
        raise ValueError(f"order-1 differences need s in (0,1), got s={s}")
    if order == 2 and not 0 < s < 2:
        raise ValueError(f"order-2 differences need s in (0,2), got s={s}")
    shells = _fd_shell_values(u, order, n_radii, p)
    w_dir = 2.0 * 4.0 * np.pi / 26.0  # antipodal pair collapsed into one term
    total = 0.0
    sup = 0.0
    for radii, norms in shells:
        g = norms / radii**s
        if r == np.inf:
            sup = max(sup, float(g.max()))
            continue
        logr = np.log(radii)
        total += w_dir * np.trapezoid(g**r, logr)
    if r == np.inf:
        return sup
    return float(total ** (1.0 / r))


def bony_decompose(u: ScalarField, v: ScalarField, j_range=None,
                   homogeneous: bool = False):
    """Paraproduct splitting uv = T_u v + T_v u + R(u, v).

    T_u v sums S_{l-1} u * Delta_l v, the remainder collects the diagonal
    pairs |l - l'| <= 1.  With the nonhomogeneous blocks every frequency
    pair is counted exactly once, so the three parts add back to the
    pointwise product up to round-off -- provided the product itself is
    resolved (combined bandwidth within the Nyquist cube), otherwise the
    comparison aliases and the caller is warned by the returned flag.
    """
    grid = u.grid
    decu = decompose(u, j_range=j_range, homogeneous=homogeneous)
    decv = decompose(v, j_range=j_range, homogeneous=homogeneous)
    labels = sorted(decu.blocks)
    bu = {j: decu.blocks[j].values for j in labels}
    bv = {j: decv.blocks[j].values for j in labels}

    cum_u = {}
    cum_v = {}
    run_u = np.zeros_like(u.values)
    run_v = np.zeros_like(v.values)
    for j in labels:
        cum_u[j] = run_u.copy()   # sum of blocks with label <= j - 1
        cum_v[j] = run_v.copy()
        run_u = run_u + bu[j]
        run_v = run_v + bv[j]

    t_uv = np.zeros_like(u.values)
    t_vu = np.zeros_like(u.values)
    rem = np.zeros_like(u.values)
    for i, l in enumerate(labels):
        prev = labels[i - 1] if i >= 1 else None
        s_u = cum_u[prev] if prev is not None else np.zeros_like(run_u)
        s_v = cum_v[prev] if prev is not None else np.zeros_like(run_v)
        t_uv += s_u * bv[l]
        t_vu += s_v * bu[l]
        for lp in (l - 1, l, l + 1):
            if lp in bu:
                rem += bu[lp] * bv[l]
    return (ScalarField(grid, t_uv), ScalarField(grid, t_vu), ScalarField(grid, rem))


def product_is_resolved(u: ScalarField, v: ScalarField, rel_tol: float = 1e-10) -> bool:
    """True when the spectra of u and v fit in half the frequency cube."""
    def kmax(f):
        fh = np.abs(np.fft.fftn(f.values))
        keep = fh > rel_tol * fh.max()
        kk = np.sqrt(f.grid.freq_norm2())
        return float(kk[keep].max()) if keep.any() else 0.0

    return kmax(u) + kmax(v) <= u.grid.nyquist * np.sqrt(3.0)
