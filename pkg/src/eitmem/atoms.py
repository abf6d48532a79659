"""Level structure, cell parameters, and field conventions for the Rb D1 lambda system.

Level numbering used throughout the package:

    1 = |5S1/2, F=2>   (lower ground hyperfine level)
    2 = |5S1/2, F=3>   (upper ground hyperfine level, omega_21 above 1)
    3 = |5P1/2, F'=2>  (lower excited hyperfine level)
    4 = |5P1/2, F'=3>  (upper excited hyperfine level, omega_43 above 3)

The probe field drives 1-3 and 1-4, the coupling field drives 2-3 and 2-4.
All internal rates and detunings are angular frequencies (rad/s).  Serialized
configuration and CLI flags use ordinary Hz; the 2*pi conversion happens at the
load boundary, nowhere else.

Field amplitude convention: E is the half-amplitude of the real field
E(t) = E*exp(-i*omega*t) + c.c., so the intensity is I = 2*c*n*eps0*E^2 and the
Rabi frequency is Omega = 2*mu*E/hbar.  The half/full-amplitude ambiguity is a
classic source of factor-of-two bugs; every conversion below is pinned by tests
against known (E, I) and (I, Omega) anchor points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.constants import atomic_mass, c as C_LIGHT, epsilon_0 as EPS_0, hbar as HBAR

TWO_PI = 2.0 * math.pi

#: Atomic mass of 85Rb in kg.
MASS_RB85 = 84.911789738 * atomic_mass

#: D1 wavelength of Rb in m.
WAVELENGTH_D1 = 794.979e-9


class DomainError(ValueError):
    """An input is outside the physical domain of an operation."""


@dataclass(frozen=True)
class AtomSpec:
    """Four-level atom: two ground and two excited hyperfine levels.

    Rates and splittings are angular (rad/s); dipole moments are in C*m.
    ``gamma3``/``gamma4`` are the total radiative decay rates of the excited
    levels.  The ground levels do not decay.
    """

    name: str
    ground_splitting: float   # omega_21, level 2 above level 1
    excited_splitting: float  # omega_43, level 4 above level 3
    gamma3: float
    gamma4: float
    dipole_13: float
    dipole_14: float
    dipole_23: float
    dipole_24: float
    mass: float = MASS_RB85
    wavelength: float = WAVELENGTH_D1

    def __post_init__(self) -> None:
        if self.ground_splitting <= 0:
            raise DomainError("ground hyperfine splitting must be positive")
        if not math.isfinite(self.excited_splitting):
            # Sign encodes the level ordering (negative puts level 3 on top),
            # which mirrored-spectrum checks rely on.
            raise DomainError("excited splitting must be finite")
        if self.gamma3 <= 0 or self.gamma4 <= 0:
            raise DomainError("excited-state decay rates must be positive")
        for mu in (self.dipole_13, self.dipole_14, self.dipole_23, self.dipole_24):
            if mu < 0:
                raise DomainError("dipole moments must be non-negative")
        if self.mass <= 0 or self.wavelength <= 0:
            raise DomainError("mass and wavelength must be positive")

    def three_level(self) -> "AtomSpec":
        """Variant with level 3 decoupled from both fields (mu_13 = mu_23 = 0)."""
        return replace(self, name=self.name + "-3lvl", dipole_13=0.0, dipole_23=0.0)

    @property
    def wavevector(self) -> float:
        """Optical wavevector magnitude 2*pi/lambda in rad/m."""
        return TWO_PI / self.wavelength


@dataclass(frozen=True)
class CellSpec:
    """Vapor-cell parameters controlling dephasing, geometry, and diffusion.

    ``intercept_b`` is the ground-coherence dephasing expressed as the
    zero-intensity intercept of the EIT-linewidth-versus-intensity line, in
    ordinary Hz.  The convention gamma_12_coll = 2*pi*(b/2) is applied by the
    ``gamma12_coll`` property.  The optical dephasing is split into a Doppler
    part and a buffer-gas pressure part (both ordinary Hz) and summed.
    """

    name: str
    kind: str                       # "buffer-gas" | "coated" | "vacuum"
    intercept_b: float              # ordinary Hz
    doppler_dephasing: float        # ordinary Hz, optical-coherence Doppler term
    pressure_dephasing: float = 0.0  # ordinary Hz, buffer-gas collision term
    gamma34_coll_hz: float | None = None  # ordinary Hz; defaults to b/2
    pressure_torr: float = 0.0
    diffusion: float = 0.0          # m^2/s, buffer-gas cells only
    beam_radius: float = 2.8e-3     # m
    cell_radius: float = 12.5e-3    # m
    cell_length: float = 75e-3      # m
    temperature: float = 295.0      # K

    _KINDS = ("buffer-gas", "coated", "vacuum")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise DomainError(f"unknown cell kind {self.kind!r}, expected one of {self._KINDS}")
        for rate in (self.intercept_b, self.doppler_dephasing, self.pressure_dephasing):
            if rate < 0:
                raise DomainError("dephasing rates must be non-negative")
        if self.kind == "buffer-gas" and self.diffusion <= 0:
            raise DomainError("buffer-gas cells require a positive diffusion coefficient")
        if self.beam_radius <= 0 or self.cell_radius <= 0 or self.cell_length <= 0:
            raise DomainError("cell geometry must be positive")
        if self.temperature <= 0:
            raise DomainError("temperature must be positive")

    @property
    def gamma12_coll(self) -> float:
        """Ground-coherence collisional dephasing, angular rad/s (= 2*pi*b/2)."""
        return TWO_PI * self.intercept_b / 2.0

    @property
    def gamma34_coll(self) -> float:
        """Excited-coherence collisional dephasing, angular rad/s (defaults to the 1-2 value)."""
        if self.gamma34_coll_hz is None:
            return self.gamma12_coll
        return TWO_PI * self.gamma34_coll_hz

    @property
    def gamma_opt_coll(self) -> float:
        """Optical-coherence collisional dephasing, angular rad/s (Doppler + pressure)."""
        return TWO_PI * (self.doppler_dephasing + self.pressure_dephasing)


@dataclass(frozen=True)
class FieldSpec:
    """One cw driving field: half-amplitude, detuning, and beam angle.

    ``detuning`` is angular (rad/s), measured from the transition to level 4:
    the probe from 1-4, the coupling from 2-4.  ``angle`` is the propagation
    angle of the probe relative to the coupling beam (rad); it only enters the
    residual-Doppler estimates, not the single-atom Bloch dynamics.
    """

    role: str          # "probe" | "coupling"
    amplitude: float   # V/m, half-amplitude
    detuning: float = 0.0
    angle: float = 0.0

    def __post_init__(self) -> None:
        if self.role not in ("probe", "coupling"):
            raise DomainError(f"unknown field role {self.role!r}")
        if self.amplitude < 0:
            raise DomainError("field amplitude must be non-negative")

    @property
    def intensity(self) -> float:
        return intensity_of_field(self.amplitude)

    @classmethod
    def from_intensity(cls, role: str, intensity: float, detuning: float = 0.0,
                       angle: float = 0.0) -> "FieldSpec":
        return cls(role=role, amplitude=field_of_intensity(intensity), detuning=detuning,
                   angle=angle)


def intensity_of_field(amplitude: float, refractive_index: float = 1.0) -> float:
    """Intensity (W/m^2) of a field with half-amplitude E (V/m): I = 2*c*n*eps0*E^2."""
    if amplitude < 0:
        raise DomainError("field amplitude must be non-negative")
    return 2.0 * C_LIGHT * refractive_index * EPS_0 * amplitude**2


def field_of_intensity(intensity: float, refractive_index: float = 1.0) -> float:
    """Half-amplitude E (V/m) for a given intensity (W/m^2). Inverse of intensity_of_field."""
    if intensity < 0:
        raise DomainError("intensity must be non-negative")
    return math.sqrt(intensity / (2.0 * C_LIGHT * refractive_index * EPS_0))


def rabi_frequency(dipole: float, amplitude: float) -> float:
    """Rabi frequency Omega = 2*mu*E/hbar (angular rad/s)."""
    return 2.0 * dipole * amplitude / HBAR


def calibrate_dipole(intensity_ref: float, rabi_ref: float) -> float:
    """Dipole moment (C*m) that gives Rabi frequency ``rabi_ref`` at ``intensity_ref``.

    mu = hbar*Omega/(2*E) with E from field_of_intensity.  Used to fix the
    default dipole moments from a measured (intensity, Rabi) calibration point
    instead of hardcoding hyperfine transition factors.
    """
    if intensity_ref <= 0 or rabi_ref <= 0:
        raise DomainError("calibration point must have positive intensity and Rabi frequency")
    return HBAR * rabi_ref / (2.0 * field_of_intensity(intensity_ref))


#: Probe calibration point: 2.8 uW/cm^2 drives a 2*pi*50.6 kHz Rabi frequency.
CALIBRATION_INTENSITY = 0.028          # W/m^2
CALIBRATION_RABI = TWO_PI * 50.6e3     # rad/s

#: Default dipole moment shared by all four transitions, ~7.3e-30 C*m.
DEFAULT_DIPOLE = calibrate_dipole(CALIBRATION_INTENSITY, CALIBRATION_RABI)


def default_rb85_d1() -> AtomSpec:
    """Default 85Rb D1 atom: measured splittings, natural linewidth, calibrated dipoles."""
    return AtomSpec(
        name="rb85-d1",
        ground_splitting=TWO_PI * 3.0357e9,
        excited_splitting=TWO_PI * 362e6,
        gamma3=TWO_PI * 5.75e6,
        gamma4=TWO_PI * 5.75e6,
        dipole_13=DEFAULT_DIPOLE,
        dipole_14=DEFAULT_DIPOLE,
        dipole_23=DEFAULT_DIPOLE,
        dipole_24=DEFAULT_DIPOLE,
    )


def coherence_dephasing(atom: AtomSpec, cell: CellSpec) -> dict[tuple[int, int], float]:
    """Coherence damping rates gamma_nm = (Gamma_n + Gamma_m)/2 + gamma_nm_coll.

    Returns a symmetric table over all level pairs n != m (angular rad/s).
    The collisional part is gamma12_coll for the ground pair, gamma34_coll for
    the excited pair, and the shared optical value for the four optical pairs.
    """
    gamma_total = {1: 0.0, 2: 0.0, 3: atom.gamma3, 4: atom.gamma4}
    coll = {
        (1, 2): cell.gamma12_coll,
        (3, 4): cell.gamma34_coll,
        (1, 3): cell.gamma_opt_coll,
        (1, 4): cell.gamma_opt_coll,
        (2, 3): cell.gamma_opt_coll,
        (2, 4): cell.gamma_opt_coll,
    }
    table: dict[tuple[int, int], float] = {}
    for (n, m), extra in coll.items():
        gamma = 0.5 * (gamma_total[n] + gamma_total[m]) + extra
        table[(n, m)] = gamma
        table[(m, n)] = gamma
    return table


def branching_rates(atom: AtomSpec) -> dict[tuple[int, int], float]:
    """Population decay rates Gamma_mn from excited level n into ground level m.

    Weights are proportional to the squared dipole moments mu_1n^2 : mu_2n^2,
    normalized so Gamma_1n + Gamma_2n = Gamma_n.  If both dipoles to an excited
    level vanish, the decay branches equally (declared fallback; the level is
    then invisible to the fields and the choice has no observable effect).
    """
    table: dict[tuple[int, int], float] = {}
    for n, gamma_n, mu1, mu2 in (
        (3, atom.gamma3, atom.dipole_13, atom.dipole_23),
        (4, atom.gamma4, atom.dipole_14, atom.dipole_24),
    ):
        w1, w2 = mu1**2, mu2**2
        total = w1 + w2
        if total == 0.0:
            table[(1, n)] = 0.5 * gamma_n
            table[(2, n)] = 0.5 * gamma_n
        else:
            table[(1, n)] = gamma_n * w1 / total
            table[(2, n)] = gamma_n * w2 / total
    return table
