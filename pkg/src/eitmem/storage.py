"""Write-store-retrieve protocol on the Bloch model.

Protocol phases: a coupling-only preparation pumps the atom toward its
steady mixture, an exponentially rising probe pulse (cut at its peak) writes
a ground-state coherence, both fields switch off together for the dark
storage interval, and the coupling alone reads the coherence back out.

The retrieved signal is |Im sigma_14(t)| while only the coupling is on; the
single-atom model has no propagating output field, so the optical coherence
is the standard stand-in for the emitted amplitude.  Efficiencies are
normalized to the zero-storage-time retrieval of the same setting, which
removes the (unmodeled) absolute write/read losses; absolute efficiencies
are out of scope.

The write phase is independent of the storage time, so it is computed once
per setting and reused across a lifetime scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

try:
    from numpy import trapezoid as _trapezoid
except ImportError:  # numpy < 2.0
    from numpy import trapz as _trapezoid

from .atoms import AtomSpec, CellSpec, DomainError, FieldSpec
from .bloch import DensityMatrix, build_generator, evolve_constant, time_evolve
from .fits import FitResult, fit_curve

__all__ = [
    "PulseSequence", "RetrievalResult", "simulate_storage", "lifetime_scan",
    "predicted_lifetime", "clear_caches",
]


@dataclass(frozen=True)
class PulseSequence:
    """Timing of one storage run.  All durations in seconds.

    The probe envelope is exp((t - probe_duration)/probe_rise) on the write
    interval: an exponential rise cut at its peak, after which probe and
    coupling switch off at the same instant.
    """

    storage_time: float
    probe_duration: float = 10e-6
    probe_rise: float = 2.5e-6
    prepare_duration: float = 50e-6
    retrieval_window: float = 30e-6
    sample_step: float = 0.1e-6

    def __post_init__(self) -> None:
        if self.storage_time < 0.0:
            raise DomainError("storage time must be non-negative")
        for name in ("probe_duration", "probe_rise", "retrieval_window", "sample_step"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be positive")
        if self.prepare_duration < 0.0:
            raise DomainError("prepare_duration must be non-negative")
        if self.sample_step > self.retrieval_window:
            raise DomainError("sample_step must not exceed the retrieval window")


@dataclass(frozen=True)
class RetrievalResult:
    """Retrieved envelope and normalized efficiency for one storage time."""

    times: np.ndarray            # retrieval-phase time offsets (s)
    signal: np.ndarray           # |Im sigma_14| samples
    stored_coherence: float      # |sigma_12| at retrieval start
    retrieved_area: float
    reference_area: float        # retrieved area of the same setting at t_s = 0
    efficiency: float
    storage_time: float


def _probe_envelope(probe_duration: float, probe_rise: float):
    def envelope(t):
        return np.exp(np.minimum(np.asarray(t, dtype=float) - probe_duration, 0.0)
                      / probe_rise)
    return envelope


@lru_cache(maxsize=32)
def _write_phase(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec, probe: FieldSpec,
                 probe_duration: float, probe_rise: float,
                 prepare_duration: float) -> DensityMatrix:
    """State at the end of the write pulse (start of the dark interval)."""
    gen = build_generator(atom, cell, coupling, probe)
    state = DensityMatrix.ground_mixture()
    if prepare_duration > 0.0:
        state = evolve_constant(gen, state, prepare_duration,
                                probe_on=False, coupling_on=True).final()
    traj = time_evolve(gen, state, np.array([0.0, probe_duration]),
                       probe_envelope=_probe_envelope(probe_duration, probe_rise))
    return traj.final()


def _retrieve(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec, probe: FieldSpec,
              start: DensityMatrix, seq: PulseSequence) -> tuple[np.ndarray, np.ndarray]:
    gen = build_generator(atom, cell, coupling, probe)
    times = np.arange(0.0, seq.retrieval_window + 0.5 * seq.sample_step, seq.sample_step)
    traj = evolve_constant(gen, start, seq.retrieval_window,
                           probe_on=False, coupling_on=True, sample_times=times)
    return times, np.abs(traj.states[:, 0, 3].imag)


@lru_cache(maxsize=32)
def _reference_area(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                    probe: FieldSpec, seq0: PulseSequence) -> float:
    rho = _write_phase(atom, cell, coupling, probe, seq0.probe_duration,
                       seq0.probe_rise, seq0.prepare_duration)
    times, signal = _retrieve(atom, cell, coupling, probe, rho, seq0)
    return float(_trapezoid(signal, times))


def clear_caches() -> None:
    """Drop the memoized write phases and reference areas."""
    _write_phase.cache_clear()
    _reference_area.cache_clear()


def simulate_storage(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                     probe: FieldSpec, seq: PulseSequence) -> RetrievalResult:
    """Run prepare/write/dark/retrieve and report the normalized efficiency."""
    rho_write = _write_phase(atom, cell, coupling, probe, seq.probe_duration,
                             seq.probe_rise, seq.prepare_duration)
    if seq.storage_time > 0.0:
        gen = build_generator(atom, cell, coupling, probe)
        rho_dark = evolve_constant(gen, rho_write, seq.storage_time,
                                   probe_on=False, coupling_on=False).final()
    else:
        rho_dark = rho_write

    times, signal = _retrieve(atom, cell, coupling, probe, rho_dark, seq)
    area = float(_trapezoid(signal, times))
    seq0 = replace(seq, storage_time=0.0)
    reference = area if seq.storage_time == 0.0 else \
        _reference_area(atom, cell, coupling, probe, seq0)
    if reference <= 0.0:
        raise DomainError(
            "no retrieved signal at zero storage time; the probe wrote no coherence")
    return RetrievalResult(
        times=times,
        signal=signal,
        stored_coherence=abs(complex(rho_dark.matrix[0, 1])),
        retrieved_area=area,
        reference_area=reference,
        efficiency=area / reference,
        storage_time=seq.storage_time,
    )


def lifetime_scan(atom: AtomSpec, cell: CellSpec, coupling: FieldSpec,
                  probe: FieldSpec, storage_times,
                  sequence: PulseSequence | None = None) -> FitResult:
    """Exponential-decay fit of normalized efficiency over storage times.

    Needs at least 6 storage times; when the cell's intercept predicts a
    lifetime, the scan must span at least twice it so the decay is actually
    resolved by the fit.
    """
    times = np.asarray(storage_times, dtype=float)
    if times.ndim != 1 or len(times) < 6:
        raise DomainError("a lifetime scan needs at least 6 storage times")
    if np.any(times < 0.0):
        raise DomainError("storage times must be non-negative")
    if cell.intercept_b > 0:
        expected = predicted_lifetime(cell)
        if float(times.max() - times.min()) < 2.0 * expected:
            raise DomainError(
                f"storage times must span at least twice the expected lifetime "
                f"({expected:.3g} s) to resolve the decay")
    seq = sequence if sequence is not None else PulseSequence(storage_time=0.0)
    efficiencies = np.array([
        simulate_storage(atom, cell, coupling, probe,
                         replace(seq, storage_time=float(t))).efficiency
        for t in times
    ])
    return fit_curve("exp-decay", times, efficiencies)


def predicted_lifetime(cell: CellSpec) -> float:
    """Dark-coherence lifetime implied by the cell's linewidth intercept.

    The intercept b (ordinary Hz) corresponds to a ground-coherence dephasing
    rate of 2*pi*(b/2), so tau = 1/(2*pi*(b/2)) = 1/(pi*b).
    """
    if cell.intercept_b <= 0.0:
        raise DomainError("predicted lifetime needs a positive linewidth intercept")
    return 1.0 / (math.pi * cell.intercept_b)
