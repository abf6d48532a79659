"""Closed-form broadening estimates: thermal velocity, residual Doppler, transit time.

These are the non-power contributions to the EIT linewidth.  All functions
return ordinary Hz (not angular), since they are meant for direct comparison
with measured linewidths and the b intercepts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as C_LIGHT, k as K_B

from .atoms import TWO_PI, AtomSpec, CellSpec, DomainError

#: First zero of the J0 Bessel function; sets the lowest diffusion mode of a
#: cylindrical beam volume.
BESSEL_J0_ZERO = 2.405


@dataclass(frozen=True)
class BroadeningInput:
    """Inputs for the residual-Doppler and transit estimates.

    ``delta_k_parallel`` is the two-photon wavevector mismatch 2*pi*nu_hf/c of
    the copropagating beams; ``wavevector`` the optical k = 2*pi/lambda.
    """

    temperature: float        # K
    mass: float               # kg
    wavevector: float         # rad/m
    delta_k_parallel: float   # rad/m
    angle: float = 0.0        # rad, probe-coupling angle
    diffusion: float = 0.0    # m^2/s
    beam_radius: float = 0.0  # m

    def __post_init__(self) -> None:
        if self.temperature <= 0 or self.mass <= 0:
            raise DomainError("temperature and mass must be positive")
        if not 0.0 <= self.angle <= 0.1:
            raise DomainError("angle outside the small-angle domain [0, 0.1] rad")

    @classmethod
    def from_specs(cls, atom: AtomSpec, cell: CellSpec, angle: float = 0.0) -> "BroadeningInput":
        return cls(
            temperature=cell.temperature,
            mass=atom.mass,
            wavevector=atom.wavevector,
            delta_k_parallel=atom.ground_splitting / C_LIGHT,
            angle=angle,
            diffusion=cell.diffusion,
            beam_radius=cell.beam_radius,
        )


def thermal_velocity(temperature: float, mass: float) -> float:
    """RMS thermal velocity sqrt(k_B*T/m) in m/s."""
    if temperature <= 0 or mass <= 0:
        raise DomainError("temperature and mass must be positive")
    return math.sqrt(K_B * temperature / mass)


def wavevector_mismatch(inp: BroadeningInput) -> float:
    """|k_c - k_p| at angle theta: sqrt(delta_k_parallel^2 + (k*theta)^2), rad/m.

    The parallel part comes from the ground hyperfine splitting between the
    two optical frequencies; the transverse part from the beam angle.
    """
    return math.hypot(inp.delta_k_parallel, inp.wavevector * inp.angle)


def residual_doppler(inp: BroadeningInput, regime: str) -> float:
    """Residual two-photon Doppler broadening in ordinary Hz.

    regime="ballistic" (vacuum/coated cells): Gamma = |dk|*v_th/(2*pi), linear
    in theta once k*theta dominates.  regime="diffusive" (buffer gas, mean free
    path far below 1/|dk|): motional narrowing leaves Gamma = |dk|^2*D/(2*pi),
    quadratic in theta.  The diffusive prefactor is the standard
    motional-narrowing result; treat it as a model choice rather than a
    measured quantity.
    """
    dk = wavevector_mismatch(inp)
    if regime == "ballistic":
        return dk * thermal_velocity(inp.temperature, inp.mass) / TWO_PI
    if regime == "diffusive":
        if inp.diffusion <= 0:
            raise DomainError("diffusive regime requires a positive diffusion coefficient")
        return dk**2 * inp.diffusion / TWO_PI
    raise DomainError(f"unknown regime {regime!r}, expected 'ballistic' or 'diffusive'")


def transit_broadening_diffusion(diffusion: float, beam_radius: float) -> float:
    """Diffusion-limited transit broadening Gamma = D*(2.405/R)^2/(2*pi), ordinary Hz.

    Lowest radial diffusion mode out of the beam cylinder.  For D = 30 cm^2/s
    and R = 2.8 mm this gives ~352 Hz.  Note: a transit *time* computed as
    1/(2*pi*Gamma) is ~0.45 ms; quoted millisecond-scale transit times for such
    cells are not reproduced by (and inconsistent with) this relation.
    """
    if diffusion <= 0 or beam_radius <= 0:
        raise DomainError("diffusion coefficient and beam radius must be positive")
    return diffusion * (BESSEL_J0_ZERO / beam_radius) ** 2 / TWO_PI


def cusp_fwhm_from_transit(transit_time: float) -> float:
    """FWHM (ordinary Hz) of the transit cusp lineshape exp(-|delta|*t_TT).

    The detuning in the exponent is in ordinary Hz: half height at
    |delta| = ln2/t_TT, so FWHM = 2*ln2/t_TT.  (With angular units the same
    transit time would imply a 2*pi-smaller width, which does not match
    observed transit-limited features.)
    """
    if transit_time <= 0:
        raise DomainError("transit time must be positive")
    return 2.0 * math.log(2.0) / transit_time


def transit_time_from_cusp_fwhm(fwhm: float) -> float:
    """Inverse of cusp_fwhm_from_transit."""
    if fwhm <= 0:
        raise DomainError("FWHM must be positive")
    return 2.0 * math.log(2.0) / fwhm


def cusp_lineshape(delta_hz, amplitude: float, transit_time: float, center_hz: float = 0.0):
    """Transit cusp A*exp(-|delta - center|*t_TT) with delta in ordinary Hz.

    Accepts scalar or ndarray ``delta_hz``.
    """
    import numpy as np

    if transit_time <= 0:
        raise DomainError("transit time must be positive")
    return amplitude * np.exp(-np.abs(np.asarray(delta_hz) - center_hz) * transit_time)


def broadening_budget(atom: AtomSpec, cell: CellSpec, angle: float = 0.0) -> list[tuple[str, float]]:
    """Broadening budget for a cell: list of (mechanism, value) rows.

    Frequencies are ordinary Hz; the thermal velocity row is in m/s and
    included for context.  The residual-Doppler regime follows the cell kind.
    """
    inp = BroadeningInput.from_specs(atom, cell, angle=angle)
    regime = "diffusive" if cell.kind == "buffer-gas" else "ballistic"
    rows = [
        ("thermal velocity [m/s]", thermal_velocity(cell.temperature, atom.mass)),
        (f"residual Doppler, {regime} [Hz]", residual_doppler(inp, regime)),
        ("ground dephasing intercept b [Hz]", cell.intercept_b),
        ("optical dephasing (Doppler + pressure) [Hz]",
         cell.doppler_dephasing + cell.pressure_dephasing),
    ]
    if cell.kind == "buffer-gas":
        rows.insert(2, ("transit (diffusion, lowest mode) [Hz]",
                        transit_broadening_diffusion(cell.diffusion, cell.beam_radius)))
    return rows
