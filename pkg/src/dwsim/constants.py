"""Physical constants, species data and unit conversions.

Internal unit conventions used throughout the package:

* energies in recoil units E_R = hbar^2 k_L^2 / (2 M), or in Hz as E/h
* magnetic fields in milligauss (mG)
* times in microseconds
* positions in meters internally, nanometers in serialized output

The spin basis is always ordered m_F = -F .. +F ascending.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

# CODATA values (12 significant digits where known to that precision).
PLANCK_H = 6.62607015e-34  # J s (exact)
HBAR = 1.05457181765e-34  # J s
BOHR_MAGNETON = 9.27401007830e-24  # J/T
ATOMIC_MASS = 1.66053906660e-27  # kg

GAUSS_TO_TESLA = 1e-4
MILLIGAUSS_TO_TESLA = 1e-7


@dataclass(frozen=True)
class SpeciesConstants:
    """Atomic species parameters for one lattice realization.

    Parameters
    ----------
    mass_kg : float
        Atomic mass in kg.
    wavelength_m : float
        Lattice light wavelength in m.
    g_f : float
        Lande factor of the trapped hyperfine manifold (sign included).
    f : float
        Total spin F; 2F+1 must be a positive integer.
    """

    mass_kg: float
    wavelength_m: float
    g_f: float
    f: float
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.mass_kg <= 0:
            raise ValueError(f"mass_kg must be positive, got {self.mass_kg}")
        if self.wavelength_m <= 0:
            raise ValueError(f"wavelength_m must be positive, got {self.wavelength_m}")
        twofp1 = 2 * self.f + 1
        if self.f < 0.5 or abs(twofp1 - round(twofp1)) > 1e-12:
            raise ValueError(f"F must be a half-integer >= 1/2, got {self.f}")

    @property
    def dim(self) -> int:
        """Spin-space dimension 2F+1."""
        return int(round(2 * self.f + 1))

    @property
    def k_l(self) -> float:
        """Lattice wavevector 2*pi/wavelength in rad/m."""
        return 2.0 * math.pi / self.wavelength_m

    @property
    def period_m(self) -> float:
        """Lattice period lambda/2 in m."""
        return self.wavelength_m / 2.0

    @property
    def recoil_j(self) -> float:
        """Recoil energy hbar^2 k_L^2 / (2 M) in J."""
        return HBAR**2 * self.k_l**2 / (2.0 * self.mass_kg)

    @property
    def recoil_hz(self) -> float:
        """Recoil energy divided by h, in Hz."""
        return self.recoil_j / PLANCK_H

    def with_g_f(self, g_f: float) -> "SpeciesConstants":
        return replace(self, g_f=g_f)


def cesium_f4(g_f: float = 0.25) -> SpeciesConstants:
    """Cs in the 6S_1/2 F=4 manifold, lattice light near the D2 line.

    g_F defaults to +1/4 (standard value for this manifold) and is
    configurable because its sign fixes which well hosts m_F > 0.
    """
    return SpeciesConstants(
        mass_kg=132.905451961 * ATOMIC_MASS,
        wavelength_m=852.35e-9,
        g_f=g_f,
        f=4.0,
        name="cs133_f4",
    )


@dataclass(frozen=True)
class UnitContext:
    """Conversion helpers bound to one species.

    All conversions are exact arithmetic on the stored constants, so
    round trips are bijective to machine precision.
    """

    species: SpeciesConstants

    def er_to_hz(self, e_er: float) -> float:
        return e_er * self.species.recoil_hz

    def hz_to_er(self, e_hz: float) -> float:
        return e_hz / self.species.recoil_hz

    def er_to_joule(self, e_er: float) -> float:
        return e_er * self.species.recoil_j

    def joule_to_er(self, e_j: float) -> float:
        return e_j / self.species.recoil_j

    def zeeman_er_per_mg(self) -> float:
        """g_F mu_B * (1 mG) expressed in E_R, per unit m_F."""
        return self.species.g_f * BOHR_MAGNETON * MILLIGAUSS_TO_TESLA / self.species.recoil_j

    def mg_to_er(self, b_mg: float) -> float:
        """Zeeman energy g_F mu_B B in E_R (per unit m_F) for B in mG."""
        return b_mg * self.zeeman_er_per_mg()

    def er_to_mg(self, e_er: float) -> float:
        return e_er / self.zeeman_er_per_mg()

    def natural_time_us(self) -> float:
        """Natural time unit hbar/E_R in microseconds."""
        return HBAR / self.species.recoil_j * 1e6

    def us_to_natural(self, t_us: float) -> float:
        return t_us / self.natural_time_us()

    def natural_to_us(self, t_nat: float) -> float:
        return t_nat * self.natural_time_us()

    def rad_per_us_per_er(self) -> float:
        """Angular frequency of one E_R, in rad/us (phase accumulation rate)."""
        return self.species.recoil_j / HBAR * 1e-6


def recoil_energy_hz(species: SpeciesConstants) -> float:
    """Recoil energy E_R/h in Hz."""
    return species.recoil_hz


def zeeman_energy_er(b_mg: float, species: SpeciesConstants) -> float:
    """Zeeman energy g_F mu_B B in E_R per unit m_F, for B in mG."""
    if not math.isfinite(b_mg):
        raise ValueError(f"field must be finite, got {b_mg}")
    return UnitContext(species).mg_to_er(b_mg)
