"""Periodic 3D grid, field containers, transforms, derivatives and norms.

The unbounded domain is approximated by a periodic box of side L; test fields
are kept band-limited and effectively supported in the central part of the box
so wrap-around stays below tolerance.  Samples are stored C-ordered with the
third axis fastest, matching the snapshot format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

SNAPSHOT_MAGIC = b"QG3F"


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with n points per axis on [0, L)^3.

    Wavenumbers follow the FFT layout xi_k = 2*pi*k/L for k in [-n/2, n/2).
    """

    n: int
    length: float

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def nyquist(self) -> float:
        return np.pi * self.n / self.length

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def coords(self, centered: bool = False):
        """Meshgrid of physical coordinates; centered shifts origin to box center."""
        x = self.axis_coords()
        if centered:
            x = x - self.length / 2.0
        return np.meshgrid(x, x, x, indexing="ij")

    def axis_freqs(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    def freqs(self):
        k = self.axis_freqs()
        return np.meshgrid(k, k, k, indexing="ij")

    def freq_norm2(self) -> np.ndarray:
        k1, k2, k3 = self.freqs()
        return k1**2 + k2**2 + k3**2

    def freq_norm_aniso2(self, F: float) -> np.ndarray:
        k1, k2, k3 = self.freqs()
        return k1**2 + k2**2 + F**2 * k3**2

    def max_dyadic_index(self, c0: float = 8.0 / 3.0) -> int:
        """Largest j with c0 * 2^j strictly below the Nyquist frequency."""
        return int(np.floor(np.log2(self.nyquist / c0) - 1e-12))

    def check_dyadic_range(self, j_max: int, c0: float = 8.0 / 3.0) -> None:
        if c0 * 2.0**j_max >= self.nyquist:
            raise ValueError(
                f"dyadic index {j_max} needs frequencies up to {c0 * 2.0 ** j_max:.2f} "
                f"but the Nyquist frequency is {self.nyquist:.2f}"
            )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ScalarField:
    """Real samples of a scalar function, immutable after construction."""

    grid: Grid3
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n,) * 3:
            raise ValueError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _freeze(v))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients of a real field (Hermitian symmetric)."""

    grid: Grid3
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n,) * 3:
            raise ValueError(f"coeffs shape {c.shape} does not match grid n={self.grid.n}")
        object.__setattr__(self, "coeffs", _freeze(c))


def transform(f: ScalarField) -> SpectralField:
    return SpectralField(f.grid, np.fft.fftn(f.values))


def inverse_transform(F: SpectralField) -> ScalarField:
    return ScalarField(F.grid, np.fft.ifftn(F.coeffs).real)


def require_same_grid(*fields) -> Grid3:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grids differ: {f.grid} vs {grid}")
    return grid


def apply_multiplier(f: ScalarField, symbol: np.ndarray) -> ScalarField:
    """Apply a Fourier multiplier given as an array over the frequency grid."""
    fh = np.fft.fftn(f.values)
    return ScalarField(f.grid, np.fft.ifftn(symbol * fh).real)


def anisotropic_norm(x, alpha: float) -> float:
    """sqrt(x1^2 + x2^2 + alpha^2 * x3^2) for a 3-vector or array of them."""
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2 + alpha**2 * x[..., 2] ** 2)


def lp_norm(f: ScalarField, p: float) -> float:
    """Riemann-sum L^p norm with cell weight (L/n)^3; p = inf is the max norm."""
    if p == np.inf:
        return float(np.abs(f.values).max())
    if p < 1:
        raise ValueError(f"p must be in [1, inf], got {p}")
    w = f.grid.spacing**3
    return float((np.abs(f.values) ** p).sum() * w) ** (1.0 / p)


def mean(f: ScalarField) -> float:
    return float(f.values.mean())


def spectral_derivative(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Exact derivative of the trigonometric interpolant along one axis."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    k = f.grid.axis_freqs()
    shape = [1, 1, 1]
    shape[axis] = f.grid.n
    mult = (1j * k.reshape(shape)) ** order
    if order % 2 == 1:
        # zero the unmatched Nyquist mode so odd derivatives of real fields stay real
        nyq = f.grid.n // 2
        idx = [slice(None)] * 3
        idx[axis] = nyq
        mult = np.broadcast_to(mult, (f.grid.n,) * 3).copy()
        mult[tuple(idx)] = 0.0
    fh = np.fft.fftn(f.values)
    return ScalarField(f.grid, np.fft.ifftn(mult * fh).real)


def gradient(f: ScalarField):
    return tuple(spectral_derivative(f, ax) for ax in range(3))


def gradient_linf(f: ScalarField) -> float:
    """max_x |grad f(x)| with the Euclidean vector norm."""
    g = gradient(f)
    return float(np.sqrt(sum(gi.values**2 for gi in g)).max())


def hessian_lp(f: ScalarField, p: float) -> float:
    """L^p norm of the pointwise Frobenius norm of the Hessian."""
    comps = []
    for i in range(3):
        for j in range(3):
            comps.append(spectral_derivative(spectral_derivative(f, i), j).values)
    frob = np.sqrt(sum(c**2 for c in comps))
    return lp_norm(ScalarField(f.grid, frob), p)


def write_snapshot(path, f: ScalarField) -> None:
    """Binary snapshot: magic 'QG3F', u32 n, f64 L, then n^3 little-endian f64."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", f.grid.n))
        fh.write(struct.pack("<d", f.grid.length))
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def read_snapshot(path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        (n,) = struct.unpack("<I", fh.read(4))
        (length,) = struct.unpack("<d", fh.read(8))
        data = np.frombuffer(fh.read(8 * n**3), dtype="<f8").reshape((n, n, n))
    return ScalarField(Grid3(int(n), float(length)), data)
