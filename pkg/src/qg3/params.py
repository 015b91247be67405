"""Physical parameters of the anisotropic diffusion operator."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity pair and stratification parameter.

    nu is the kinematic viscosity, nu_prime the thermal diffusivity, F the
    stratification parameter in (0, 1].  All derived ratios are normalized by
    nu0 = min(nu, nu'), so min(M, M_prime) == 1 and max(M, M_prime) == M_visc.
    """

    nu: float
    nu_prime: float
    F: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.nu_prime > 0:
            raise ValueError(f"nu_prime must be positive, got {self.nu_prime}")
        if not 0 < self.F <= 1:
            raise ValueError(f"F must lie in (0, 1], got {self.F}")

    @property
    def nu0(self) -> float:
        return min(self.nu, self.nu_prime)

    @property
    def M(self) -> float:
        return self.nu / self.nu0

    @property
    def M_prime(self) -> float:
        return self.nu_prime / self.nu0

    @property
    def M_visc(self) -> float:
        return max(self.nu, self.nu_prime) / min(self.nu, self.nu_prime)

    @property
    def nonlocal_coeff(self) -> float:
        """Coefficient (nu - nu') F^2 (1 - F^2) of the squared nonlocal part."""
        return (self.nu - self.nu_prime) * self.F**2 * (1.0 - self.F**2)

    def is_local(self) -> bool:
        """True when the operator degenerates to a constant-coefficient Laplacian."""
        return self.nu == self.nu_prime or self.F == 1.0
