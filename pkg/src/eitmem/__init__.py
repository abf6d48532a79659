"""Warm rubidium vapor EIT toolkit: spectra, linewidth scans, and light storage.

The package models a four-level lambda scheme on the Rb-85 D1 line (both
hyperfine excited states, optionally collapsed to a single one), solves the
driven master equation for steady-state spectra and pulsed storage sequences,
and ships the fitting and trace-analysis helpers needed to compare against
measured linewidth and optical-depth data.
"""

__version__ = "0.1.0"

from .atoms import (
    AtomSpec,
    CellSpec,
    DomainError,
    FieldSpec,
    calibrate_dipole,
    default_rb85_d1,
    field_of_intensity,
    intensity_of_field,
    rabi_frequency,
)
from .presets import ATOM_PRESETS, CELL_PRESETS, load_atom, load_cell, save_spec
from .bloch import (
    DegenerateSteadyStateError,
    DensityMatrix,
    EvolutionResult,
    Generator,
    SolverError,
    StiffnessError,
    build_generator,
    evolve_constant,
    probe_absorption,
    steady_state,
    steady_state_sweep,
    time_evolve,
)
from .spectra import (
    Spectrum,
    SpectrumError,
    asymmetry,
    detuning_series,
    eit_spectrum,
    extract_contrast,
    extract_fwhm,
    linewidth_vs_intensity,
    net_transparency,
    no_coupling_reference,
)
from .broadening import (
    BroadeningInput,
    broadening_budget,
    cusp_fwhm_from_transit,
    cusp_lineshape,
    residual_doppler,
    thermal_velocity,
    transit_broadening_diffusion,
    transit_time_from_cusp_fwhm,
    wavevector_mismatch,
)
from .fits import (
    MODEL_SHAPES,
    FitError,
    FitResult,
    ModelShape,
    bootstrap_sigmas,
    eval_model,
    fit_curve,
    fit_uncertainty,
    get_shape,
)
from .storage import (
    PulseSequence,
    RetrievalResult,
    lifetime_scan,
    predicted_lifetime,
    simulate_storage,
)
from .labio import (
    TraceFormatError,
    TraceSet,
    average_traces,
    beer_lambert_od,
    load_traces,
    od_estimate,
    write_traces,
)
from .kernels import BACKEND

__all__ = [
    "__version__",
    "AtomSpec", "CellSpec", "FieldSpec", "DomainError",
    "calibrate_dipole", "default_rb85_d1", "field_of_intensity",
    "intensity_of_field", "rabi_frequency",
    "ATOM_PRESETS", "CELL_PRESETS", "load_atom", "load_cell", "save_spec",
    "DensityMatrix", "Generator", "EvolutionResult", "SolverError",
    "DegenerateSteadyStateError", "StiffnessError", "build_generator",
    "steady_state", "steady_state_sweep", "time_evolve", "evolve_constant",
    "probe_absorption",
    "Spectrum", "SpectrumError", "eit_spectrum", "no_coupling_reference",
    "detuning_series", "extract_fwhm", "extract_contrast", "asymmetry",
    "net_transparency", "linewidth_vs_intensity",
    "BroadeningInput", "broadening_budget", "thermal_velocity",
    "residual_doppler", "wavevector_mismatch", "transit_broadening_diffusion",
    "cusp_fwhm_from_transit", "transit_time_from_cusp_fwhm", "cusp_lineshape",
    "ModelShape", "MODEL_SHAPES", "get_shape", "eval_model", "FitResult",
    "FitError", "fit_curve", "fit_uncertainty", "bootstrap_sigmas",
    "PulseSequence", "RetrievalResult", "simulate_storage", "lifetime_scan",
    "predicted_lifetime",
    "TraceSet", "TraceFormatError", "load_traces", "average_traces",
    "beer_lambert_od", "od_estimate", "write_traces",
    "BACKEND",
]
