"""Probe-detuning sweeps and EIT lineshape analysis.

Spectra are synthesized pointwise from the cw steady state (reference traces
from the ground-mixture response; see ``no_coupling_reference``).  The
absorption ordinate is the dimensionless -Im(sigma_14).  Detuning axes are
angular (rad/s) inside the package; extraction routines report widths in
ordinary Hz.

Sweeps are embarrassingly parallel over grid points.  Set the EITMEM_THREADS
environment variable to split a sweep into that many chunks solved on a
thread pool; results are assembled in grid order, so the output is identical
for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

try:
    from numpy import trapezoid as _trapezoid
except ImportError:  # numpy < 2.0
    from numpy import trapz as _trapezoid

from .atoms import (AtomSpec, CellSpec, DomainError, FieldSpec, TWO_PI,
                    coherence_dephasing, rabi_frequency)
from .bloch import (Generator, build_generator, mixture_response_sweep,
                    steady_state_sweep)

__all__ = [
    "Spectrum", "SpectrumError", "eit_spectrum", "no_coupling_reference",
    "detuning_series", "extract_fwhm", "extract_contrast", "asymmetry",
    "net_transparency", "linewidth_vs_intensity",
]

MIN_SAMPLES = 11


class SpectrumError(RuntimeError):
    """A spectrum lacks the feature an extraction routine needs."""


@dataclass(frozen=True)
class Spectrum:
    """Absorption versus probe detuning on a fixed grid.

    ``detunings`` are angular (rad/s), strictly increasing, at least 11
    samples; ``absorption`` is -Im(sigma_14) per point.  ``meta`` carries the
    parameter fingerprint of the run that produced the spectrum.
    """

    detunings: np.ndarray
    absorption: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        det = np.asarray(self.detunings, dtype=float)
        ab = np.asarray(self.absorption, dtype=float)
        if det.ndim != 1 or det.shape != ab.shape:
            raise DomainError("detunings and absorption must be 1-d arrays of equal length")
        if len(det) < MIN_SAMPLES:
            raise DomainError(f"a spectrum needs at least {MIN_SAMPLES} samples, got {len(det)}")
        if np.any(np.diff(det) <= 0.0):
            raise DomainError("detunings must be strictly increasing")
        if not (np.all(np.isfinite(det)) and np.all(np.isfinite(ab))):
            raise DomainError("spectrum samples must be finite")
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "absorption", ab)

    @property
    def detunings_hz(self) -> np.ndarray:
        """Detuning axis in ordinary Hz."""
        return self.detunings / TWO_PI

    def __len__(self) -> int:
        return len(self.detunings)


def _thread_count() -> int:
    raw = os.environ.get("EITMEM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"EITMEM_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _validated_grid(detunings) -> np.ndarray:
    grid = np.asarray(detunings, dtype=float)
    if grid.ndim != 1 or len(grid) < MIN_SAMPLES:
        raise DomainError(f"detuning grid must be 1-d with at least {MIN_SAMPLES} points")
    if np.any(np.diff(grid) <= 0.0):
        raise DomainError("detuning grid must be strictly increasing")
    return grid


def _parallel_sweep(solve, grid: np.ndarray) -> np.ndarray:
    """Run ``solve`` over the grid, chunked across EITMEM_THREADS threads."""
    n_threads = _thread_count()
    if n_threads == 1 or len(grid) < 4 * n_threads:
        return solve(grid)
    chunks = np.array_split(grid, n_threads)
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        parts = list(pool.map(solve, chunks))
    return np.concatenate(parts)


def _meta(gen: Generator, atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
          probe: FieldSpec, grid: np.ndarray, sweep: str) -> dict:
    return {
        "atom": atom.name,
        "cell": cell.name,
        "variant": gen.variant,
        "sweep": sweep,
        "coupling_amplitude_v_m": coupling.amplitude,
        "coupling_intensity_w_m2": coupling.intensity,
        "delta_c_hz": coupling.detuning / TWO_PI,
        "probe_amplitude_v_m": probe.amplitude,
        "grid_start_hz": grid[0] / TWO_PI,
        "grid_stop_hz": grid[-1] / TWO_PI,
        "grid_points": len(grid),
    }


def eit_spectrum(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                 probe: FieldSpec, detunings) -> Spectrum:
    """Steady-state absorption spectrum over a probe detuning grid (rad/s).

    The grid overrides ``probe.detuning``.  Solver failures propagate with the
    offending detuning named.  A single-field reference trace should come from
    ``no_coupling_reference`` instead: with the coupling truly off, the cw
    steady state is the fully pumped (transparent) one.
    """
    grid = _validated_grid(detunings)
    gen = build_generator(atom, cell, coupling, replace(probe, detuning=float(grid[0])))

    def solve(chunk: np.ndarray) -> np.ndarray:
        return -steady_state_sweep(gen, chunk)[:, 0, 3].imag

    absorption = _parallel_sweep(solve, grid)
    meta = _meta(gen, atom, cell, coupling, probe, grid, sweep="steady-state")
    return Spectrum(detunings=grid, absorption=absorption, meta=meta)


def no_coupling_reference(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                          probe: FieldSpec, detunings) -> Spectrum:
    """Single-field absorption profile; the baseline for contrast metrics.

    The coupling is extinguished and the sweep solves the coherence response
    of the unpolarized ground mixture rather than the cw steady state: with no
    repopulation path between the ground levels, the one-field steady state is
    complete optical pumping into the unprobed level, and a reference trace is
    always recorded long before that limit is reached.
    """
    grid = _validated_grid(detunings)
    dark = replace(coupling, amplitude=0.0)
    gen = build_generator(atom, cell, dark, replace(probe, detuning=float(grid[0])))

    def solve(chunk: np.ndarray) -> np.ndarray:
        return -mixture_response_sweep(gen, chunk)[:, 0, 3].imag

    absorption = _parallel_sweep(solve, grid)
    meta = _meta(gen, atom, cell, dark, probe, grid, sweep="mixture-response")
    return Spectrum(detunings=grid, absorption=absorption, meta=meta)


def detuning_series(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                    probe: FieldSpec, delta_cs, relative_grid) -> list[Spectrum]:
    """One spectrum per coupling detuning, each on a grid tracking the resonance.

    ``relative_grid`` (rad/s) is offset by each coupling detuning, so every
    spectrum is centered on its own two-photon resonance.  Spectra come back
    in the order of ``delta_cs``.
    """
    rel = np.asarray(relative_grid, dtype=float)
    out = []
    for dc in np.asarray(delta_cs, dtype=float):
        shifted = replace(coupling, detuning=float(dc))
        out.append(eit_spectrum(atom, cell, shifted, probe, dc + rel))
    return out


def _dip_anchor(spectrum: Spectrum) -> tuple[int, float, float]:
    """(dip index, shoulder baseline, depth) of the transparency feature.

    The baseline is the lower of the two absorption maxima flanking the
    minimum; a minimum on the grid edge, or one that does not descend below
    that baseline, means there is no dip to measure.
    """
    a = spectrum.absorption
    i_min = int(np.argmin(a))
    if i_min == 0 or i_min == len(a) - 1:
        raise SpectrumError("no transparency feature: absorption minimum sits on the grid edge")
    left_max = float(np.max(a[: i_min + 1]))
    right_max = float(np.max(a[i_min:]))
    baseline = min(left_max, right_max)
    depth = baseline - float(a[i_min])
    if depth <= 0.0 or depth <= 1e-12 * abs(baseline):
        raise SpectrumError("no transparency feature: spectrum has no dip below its shoulders")
    return i_min, baseline, depth


def extract_fwhm(spectrum: Spectrum) -> float:
    """Full width of the transparency dip at half depth, in ordinary Hz.

    Depth is measured from the local absorption baseline (the lower flanking
    shoulder) down to the dip minimum; the two half-depth crossings are found
    by linear interpolation between samples.
    """
    i_min, baseline, depth = _dip_anchor(spectrum)
    a = spectrum.absorption
    x = spectrum.detunings_hz
    half = float(a[i_min]) + 0.5 * depth

    def _crossing(direction: int) -> float:
        i = i_min
        while True:
            j = i + direction
            if j < 0 or j >= len(a):
                raise SpectrumError(
                    "no transparency feature: half-depth level never recrossed")
            if a[j] >= half:
                # crossing between j (above) and i (below)
                frac = (half - a[i]) / (a[j] - a[i])
                return float(x[i] + frac * (x[j] - x[i]))
            i = j

    return _crossing(+1) - _crossing(-1)


def extract_contrast(spectrum: Spectrum, reference: Spectrum) -> float:
    """Dip depth as a fraction of the no-coupling absorption at the dip center.

    A spectrum with no transparency feature has zero contrast by definition.
    """
    if not np.array_equal(spectrum.detunings, reference.detunings):
        raise DomainError("spectrum and reference must share the same detuning grid")
    try:
        i_min, _, _ = _dip_anchor(spectrum)
    except SpectrumError:
        return 0.0
    baseline = float(reference.absorption[i_min])
    if baseline <= 0.0:
        raise SpectrumError("zero baseline absorption at the dip center")
    return (baseline - float(spectrum.absorption[i_min])) / baseline


def asymmetry(spectrum: Spectrum) -> float:
    """Normalized left/right area imbalance about the spectrum's extremum.

    The extremum is the sample farthest from the median absorption (the dip
    of a transparency spectrum, the peak of an absorptive one).  Areas are
    trapezoid integrals of the absorption above its minimum, split at the
    extremum; the result is (right - left) / (right + left), in [-1, 1].
    Intended for ordering and sign checks, not as a calibrated observable.
    """
    a = spectrum.absorption - np.min(spectrum.absorption)
    x = spectrum.detunings_hz
    i_star = int(np.argmax(np.abs(spectrum.absorption - np.median(spectrum.absorption))))
    left = float(_trapezoid(a[: i_star + 1], x[: i_star + 1]))
    right = float(_trapezoid(a[i_star:], x[i_star:]))
    total = left + right
    if total == 0.0:
        return 0.0
    return (right - left) / total


def net_transparency(spectrum: Spectrum) -> float:
    """Signed feature area against the spectrum's own edge baseline, in Hz units.

    A straight line through the first and last samples stands in for the local
    absorption background, so a raised overall level (optical pumping by the
    coupling field) does not masquerade as absorption.  Positive values mean
    the feature is net transparent, negative net absorptive.
    """
    deltas = spectrum.detunings_hz
    values = spectrum.absorption
    line = values[0] + (values[-1] - values[0]) * (deltas - deltas[0]) \
        / (deltas[-1] - deltas[0])
    return float(_trapezoid(line - values, deltas))


def _window_half_span(atom: AtomSpec, cell: CellSpec, coupling_amplitude: float) -> float:
    """Adaptive half-span (rad/s) for a dip-resolving grid: 32x the estimated half-width."""
    gammas = coherence_dephasing(atom, cell)
    omega_c = rabi_frequency(atom.dipole_24, coupling_amplitude)
    half_width = gammas[(1, 2)] + omega_c**2 / (4.0 * gammas[(1, 4)])
    return 32.0 * half_width


def linewidth_vs_intensity(atom: AtomSpec, cell: CellSpec, intensities,
                           probe: FieldSpec, delta_c: float = 0.0,
                           grid_points: int = 4001) -> np.ndarray:
    """EIT FWHM at each coupling intensity; columns (intensity W/m^2, FWHM Hz).

    Each intensity gets its own grid, spanning 32 estimated half-widths about
    the two-photon resonance so the dip and its shoulders are always resolved.
    The returned table feeds a linear fit whose intercept estimates the
    zero-intensity linewidth.
    """
    values = np.asarray(intensities, dtype=float)
    if values.ndim != 1 or len(values) < 2:
        raise DomainError("need at least two coupling intensities")
    if np.any(values <= 0.0):
        raise DomainError("coupling intensities must be positive")
    if np.max(values) < 5.0 * np.min(values):
        raise DomainError("intensity list must span at least a factor of 5")

    rows = np.empty((len(values), 2))
    for i, intensity in enumerate(values):
        coupling = FieldSpec.from_intensity("coupling", float(intensity), detuning=delta_c)
        half_span = _window_half_span(atom, cell, coupling.amplitude)
        grid = delta_c + np.linspace(-half_span, half_span, grid_points)
        fwhm = extract_fwhm(eit_spectrum(atom, cell, coupling, probe, grid))
        rows[i] = (intensity, fwhm)
    return rows
