"""Spectrum synthesis and lineshape extraction."""

import numpy as np
import pytest
from dataclasses import replace

from eitmem import (
    FieldSpec,
    Spectrum,
    SpectrumError,
    asymmetry,
    detuning_series,
    eit_spectrum,
    extract_contrast,
    extract_fwhm,
    fit_curve,
    linewidth_vs_intensity,
    net_transparency,
    no_coupling_reference,
)
from eitmem.atoms import TWO_PI, DomainError


def lorentzian_dip(gamma_ang, depth=0.5, span=50.0, n=2001):
    det = np.linspace(-span * gamma_ang, span * gamma_ang, n)
    absorption = 1.0 - depth * gamma_ang**2 / (gamma_ang**2 + det**2)
    return Spectrum(det, absorption)


# --- extract_fwhm on synthetic shapes ---------------------------------------

def test_fwhm_of_exact_lorentzian_dip():
    gamma = TWO_PI * 2e3
    fwhm = extract_fwhm(lorentzian_dip(gamma))
    assert fwhm == pytest.approx(2.0 * gamma / TWO_PI, rel=1e-3)


def test_fwhm_of_exponential_cusp():
    width_hz = 5e3
    det = TWO_PI * np.linspace(-40e3, 40e3, 2001)
    absorption = 1.0 - 0.8 * np.exp(-np.abs(det / TWO_PI) / width_hz)
    fwhm = extract_fwhm(Spectrum(det, absorption))
    assert fwhm == pytest.approx(2.0 * np.log(2.0) * width_hz, rel=2e-3)


def test_fwhm_rejects_flat_spectrum():
    det = TWO_PI * np.linspace(-1e3, 1e3, 101)
    with pytest.raises(SpectrumError, match="no transparency feature"):
        extract_fwhm(Spectrum(det, np.full(101, 0.3)))


def test_fwhm_rejects_absorptive_peak():
    gamma = TWO_PI * 2e3
    det = np.linspace(-20 * gamma, 20 * gamma, 801)
    bump = 0.1 + 0.5 * gamma**2 / (gamma**2 + det**2)
    with pytest.raises(SpectrumError, match="no transparency feature"):
        extract_fwhm(Spectrum(det, bump))


def test_fwhm_rejects_monotone_ramp():
    det = TWO_PI * np.linspace(-1e3, 1e3, 101)
    with pytest.raises(SpectrumError, match="no transparency feature"):
        extract_fwhm(Spectrum(det, np.linspace(0.1, 0.4, 101)))


# --- eit_spectrum physics ----------------------------------------------------

def test_grid_refinement_stability(atom, ne_cell, coupling_64, weak_probe):
    widths = []
    for n in (1201, 2401):
        grid = TWO_PI * np.linspace(-40e3, 40e3, n)
        widths.append(extract_fwhm(
            eit_spectrum(atom, ne_cell, coupling_64, weak_probe, grid)))
    assert abs(widths[1] - widths[0]) < 0.005 * widths[0]


def test_three_level_resonant_dip_is_symmetric(atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-30e3, 30e3, 1501)
    spectrum = eit_spectrum(atom.three_level(), ne_cell, coupling_64, weak_probe, grid)
    assert abs(asymmetry(spectrum)) < 0.005


def test_three_level_resonant_dip_is_lorentzian(atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-30e3, 30e3, 1201)
    spectrum = eit_spectrum(atom.three_level(), ne_cell, coupling_64, weak_probe, grid)
    fit = fit_curve("lorentzian-dip", spectrum.detunings_hz, spectrum.absorption)
    assert fit.converged
    depth = spectrum.absorption.max() - spectrum.absorption.min()
    assert fit.rms < 0.01 * depth


def test_four_level_dip_minimum_sits_at_positive_detuning(
        atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-10e3, 10e3, 2001)
    spectrum = eit_spectrum(atom, ne_cell, coupling_64, weak_probe, grid)
    i_min = int(np.argmin(spectrum.absorption))
    assert spectrum.detunings_hz[i_min] > 0.0


def test_zero_coupling_spectrum_is_featureless(atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-20e3, 20e3, 201)
    dark = replace(coupling_64, amplitude=0.0)
    spectrum = eit_spectrum(atom, ne_cell, dark, weak_probe, grid)
    # Fully pumped into the unprobed ground level: no absorption, no dip.
    assert np.abs(spectrum.absorption).max() < 1e-12
    with pytest.raises(SpectrumError, match="no transparency feature"):
        extract_fwhm(spectrum)


def test_mirrored_level_structure_mirrors_the_spectrum(
        atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-50e3, 50e3, 301)
    delta_c = TWO_PI * 30e6
    direct = eit_spectrum(atom, ne_cell, replace(coupling_64, detuning=delta_c),
                          weak_probe, grid)
    flipped_atom = replace(atom, excited_splitting=-atom.excited_splitting)
    mirrored = eit_spectrum(flipped_atom, ne_cell,
                            replace(coupling_64, detuning=-delta_c),
                            weak_probe, (-grid)[::-1])
    assert np.abs(mirrored.absorption[::-1] - direct.absorption).max() < 1e-12


def test_spectrum_meta_fingerprint(atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-20e3, 20e3, 11)
    spectrum = eit_spectrum(atom, ne_cell, coupling_64, weak_probe, grid)
    assert spectrum.meta["cell"] == "ne-5torr"
    assert spectrum.meta["variant"] == "four-level"
    assert spectrum.meta["sweep"] == "steady-state"
    assert spectrum.meta["grid_points"] == 11
    assert spectrum.meta["coupling_amplitude_v_m"] == pytest.approx(64.0, rel=1e-6)


# --- reference sweep and contrast ---------------------------------------------

def test_reference_is_flat_positive_absorption(atom, ne_cell, coupling_64, weak_probe):
    grid = TWO_PI * np.linspace(-40e3, 40e3, 101)
    reference = no_coupling_reference(atom, ne_cell, coupling_64, weak_probe, grid)
    assert reference.meta["sweep"] == "mixture-response"
    assert reference.meta["coupling_amplitude_v_m"] == 0.0
    assert np.all(reference.absorption > 0.0)
    # One-photon line is ~500 MHz wide; over 80 kHz it is flat to ppm.
    spread = reference.absorption.max() - reference.absorption.min()
    assert spread < 1e-4 * reference.absorption.max()


def test_contrast_trivial_values():
    det = TWO_PI * np.linspace(-10e3, 10e3, 201)
    shoulders = np.full(201, 0.4)
    dip_to_zero = 0.4 * (1.0 - np.exp(-((det / TWO_PI) ** 2) / (2 * 1.5e3**2)))
    reference = Spectrum(det, shoulders)
    assert extract_contrast(Spectrum(det, dip_to_zero), reference) == pytest.approx(1.0)
    assert extract_contrast(reference, reference) == 0.0


def test_contrast_zero_baseline_raises():
    det = TWO_PI * np.linspace(-10e3, 10e3, 201)
    dip = 0.4 - 0.2 * np.exp(-((det / TWO_PI) ** 2) / (2 * 1.5e3**2))
    with pytest.raises(SpectrumError, match="zero baseline"):
        extract_contrast(Spectrum(det, dip), Spectrum(det, np.zeros(201)))


def test_contrast_requires_shared_grid():
    det = TWO_PI * np.linspace(-10e3, 10e3, 201)
    spectrum = Spectrum(det, np.full(201, 0.4))
    other = Spectrum(det * 2.0, np.full(201, 0.4))
    with pytest.raises(DomainError, match="same detuning grid"):
        extract_contrast(spectrum, other)


def test_buffer_gas_cell_has_highest_contrast(
        atom, ne_cell, alkene_cell, paraffin_cell, weak_probe):
    for intensity in (2.9, 21.8):
        coupling = FieldSpec.from_intensity("coupling", intensity)
        contrasts = {}
        for cell in (ne_cell, alkene_cell, paraffin_cell):
            span = 80e3 if cell.kind == "buffer-gas" else 400e3
            grid = TWO_PI * np.linspace(-span, span, 1601)
            spectrum = eit_spectrum(atom, cell, coupling, weak_probe, grid)
            reference = no_coupling_reference(atom, cell, coupling, weak_probe, grid)
            contrasts[cell.name] = extract_contrast(spectrum, reference)
        assert contrasts["ne-5torr"] > contrasts["alkene"]
        assert contrasts["ne-5torr"] > contrasts["paraffin"]


# --- asymmetry and net transparency ------------------------------------------

def test_asymmetry_of_symmetric_dip_is_zero():
    spectrum = lorentzian_dip(TWO_PI * 2e3, n=2001)
    assert abs(asymmetry(spectrum)) < 1e-12


def test_asymmetry_flips_sign_under_mirror():
    det = TWO_PI * np.linspace(-10e3, 10e3, 801)
    dip = 1.0 - 0.6 * np.exp(-((det / TWO_PI + 3e3) ** 2) / (2 * 1.5e3**2))
    forward = asymmetry(Spectrum(det, dip))
    backward = asymmetry(Spectrum(det, dip[::-1]))
    assert forward > 0.1  # dip left of center leaves more area on the right
    assert backward == pytest.approx(-forward, rel=1e-12)


def test_net_transparency_sign_conventions():
    det = TWO_PI * np.linspace(-10e3, 10e3, 801)
    hz = det / TWO_PI
    dip = 0.5 - 0.3 * np.exp(-(hz**2) / (2 * 1.5e3**2))
    bump = 0.5 + 0.3 * np.exp(-(hz**2) / (2 * 1.5e3**2))
    ramp = np.linspace(0.2, 0.7, 801)
    assert net_transparency(Spectrum(det, dip)) > 0.0
    assert net_transparency(Spectrum(det, bump)) < 0.0
    assert abs(net_transparency(Spectrum(det, ramp))) < 1e-12


def test_net_transparency_flips_for_far_detuned_coupling(
        atom, ne_cell, coupling_64, weak_probe):
    rel = TWO_PI * np.linspace(-40e3, 40e3, 1201)
    resonant, far_blue = detuning_series(
        atom, ne_cell, coupling_64, weak_probe,
        delta_cs=[0.0, TWO_PI * 800e6], relative_grid=rel)
    assert net_transparency(resonant) > 0.0
    assert net_transparency(far_blue) < 0.0


# --- detuning_series -----------------------------------------------------------

def test_detuning_series_centers_each_grid(atom, ne_cell, coupling_64, weak_probe):
    rel = TWO_PI * np.linspace(-20e3, 20e3, 11)
    delta_cs = TWO_PI * np.array([-5e6, 0.0, 5e6])
    series = detuning_series(atom, ne_cell, coupling_64, weak_probe, delta_cs, rel)
    assert len(series) == 3
    for dc, spectrum in zip(delta_cs, series):
        assert np.array_equal(spectrum.detunings, dc + rel)
        assert spectrum.meta["delta_c_hz"] == pytest.approx(dc / TWO_PI)


# --- linewidth_vs_intensity -----------------------------------------------------

def test_linewidth_scan_is_monotone(atom, ne_cell, weak_probe):
    table = linewidth_vs_intensity(atom, ne_cell, [2.0, 10.0, 24.0], weak_probe,
                                   grid_points=1501)
    assert table.shape == (3, 2)
    assert np.array_equal(table[:, 0], [2.0, 10.0, 24.0])
    assert np.all(np.diff(table[:, 1]) > 0.0)


def test_linewidth_scan_validation(atom, ne_cell, weak_probe):
    with pytest.raises(DomainError, match="at least two"):
        linewidth_vs_intensity(atom, ne_cell, [3.0], weak_probe)
    with pytest.raises(DomainError, match="positive"):
        linewidth_vs_intensity(atom, ne_cell, [0.0, 10.0], weak_probe)
    with pytest.raises(DomainError, match="factor of 5"):
        linewidth_vs_intensity(atom, ne_cell, [2.0, 3.0, 4.0], weak_probe)


# --- determinism under threading ------------------------------------------------

def test_thread_count_does_not_change_results(
        atom, ne_cell, coupling_64, weak_probe, monkeypatch):
    grid = TWO_PI * np.linspace(-30e3, 30e3, 241)
    monkeypatch.delenv("EITMEM_THREADS", raising=False)
    serial = eit_spectrum(atom, ne_cell, coupling_64, weak_probe, grid)
    monkeypatch.setenv("EITMEM_THREADS", "4")
    threaded = eit_spectrum(atom, ne_cell, coupling_64, weak_probe, grid)
    reference = no_coupling_reference(atom, ne_cell, coupling_64, weak_probe, grid)
    monkeypatch.delenv("EITMEM_THREADS")
    serial_reference = no_coupling_reference(atom, ne_cell, coupling_64, weak_probe, grid)
    assert np.array_equal(serial.absorption, threaded.absorption)
    assert np.array_equal(serial_reference.absorption, reference.absorption)


def test_invalid_thread_count_rejected(atom, ne_cell, coupling_64, weak_probe,
                                       monkeypatch):
    monkeypatch.setenv("EITMEM_THREADS", "many")
    grid = TWO_PI * np.linspace(-30e3, 30e3, 41)
    with pytest.raises(DomainError, match="EITMEM_THREADS"):
        eit_spectrum(atom, ne_cell, coupling_64, weak_probe, grid)


# --- validation ------------------------------------------------------------------

def test_spectrum_validation():
    det = TWO_PI * np.linspace(-1e3, 1e3, 11)
    with pytest.raises(DomainError, match="at least 11"):
        Spectrum(det[:5], np.zeros(5))
    with pytest.raises(DomainError, match="strictly increasing"):
        Spectrum(det[::-1], np.zeros(11))
    with pytest.raises(DomainError, match="finite"):
        Spectrum(det, np.full(11, np.nan))
    with pytest.raises(DomainError, match="equal length"):
        Spectrum(det, np.zeros(12))
    spectrum = Spectrum(det, np.zeros(11))
    assert len(spectrum) == 11
    assert np.allclose(spectrum.detunings_hz, det / TWO_PI)


def test_eit_spectrum_grid_validation(atom, ne_cell, coupling_64, weak_probe):
    with pytest.raises(DomainError, match="at least 11"):
        eit_spectrum(atom, ne_cell, coupling_64, weak_probe,
                     TWO_PI * np.linspace(-1e3, 1e3, 5))
    with pytest.raises(DomainError, match="strictly increasing"):
        eit_spectrum(atom, ne_cell, coupling_64, weak_probe,
                     TWO_PI * np.linspace(1e3, -1e3, 11))
