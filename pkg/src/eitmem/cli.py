"""Command-line front end: synthesis, scans, storage runs, fitting, trace analysis.

Every run writes its artifacts plus a JSON manifest holding the fully resolved
parameter set; ``--from-manifest`` replays a manifest and regenerates the same
artifacts byte for byte.  All CSV floats are written with ``repr`` so the text
round-trips through ``float`` exactly.

Exit codes: 0 success, 2 input or usage error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .atoms import (
    CALIBRATION_INTENSITY,
    DomainError,
    FieldSpec,
    TWO_PI,
    intensity_of_field,
)
from .bloch import SolverError, build_generator, evolve_constant, time_evolve
from .broadening import broadening_budget
from .fits import FitError, MODEL_SHAPES, bootstrap_sigmas, fit_curve, fit_uncertainty
from .labio import TraceFormatError, average_traces, beer_lambert_od, load_traces, od_estimate
from .presets import load_atom, load_cell
from .spectra import (
    SpectrumError,
    detuning_series,
    eit_spectrum,
    extract_fwhm,
    linewidth_vs_intensity,
    net_transparency,
    asymmetry,
)
from .storage import (
    PulseSequence,
    lifetime_scan,
    predicted_lifetime,
    simulate_storage,
)

#: Coupling intensity (W/m^2) of a 64 V/m half-amplitude field, the setting the
#: default presets are documented against.
DEFAULT_COUPLING_INTENSITY = intensity_of_field(64.0)

_TRAJECTORY_SAMPLES = 501


# ---------------------------------------------------------------------------
# small helpers shared by the handlers


# argparse only accepts a leading-dash option value when it looks like a bare
# negative number, which rejects range values such as -30e3:30e3:801; widen
# the test to anything starting with a dash and a digit.
_NEGATIVE_VALUE = re.compile(r"^-\d.*$")


def _accept_negative_values(parser: argparse.ArgumentParser) -> None:
    parser._negative_number_matcher = _NEGATIVE_VALUE


def _grid_spec(text: str):
    """Parse ``start:stop:n`` into (float, float, int) with n >= 2."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:n, got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {text!r}: {exc}") from None
    if count < 2:
        raise argparse.ArgumentTypeError("a range needs at least 2 points")
    if stop <= start:
        raise argparse.ArgumentTypeError("range stop must exceed start")
    return start, stop, count


def _init_list(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad init list {text!r}: {exc}") from None


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return repr(float(value))


def _write_csv(path: Path, manifest_name: str, header: list[str], rows) -> None:
    lines = [f"# manifest={manifest_name}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, manifest_name: str, payload: dict) -> None:
    payload = {"manifest": manifest_name, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _manifest_path(out: str) -> Path:
    out_path = Path(out)
    return out_path.with_name(out_path.stem + ".manifest.json")


def _digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _digest_sources(*sources) -> dict:
    """Digest every source that is an actual file (or every CSV in a directory)."""
    digests: dict[str, str] = {}
    for source in sources:
        if source is None:
            continue
        path = Path(source)
        if path.is_file():
            digests[str(source)] = _digest(path)
        elif path.is_dir():
            for child in sorted(path.glob("*.csv")):
                digests[str(child)] = _digest(child)
    return digests


def _resolve_model(params: dict):
    atom = load_atom(params["atom"])
    if params["model"] == "three-level":
        atom = atom.three_level()
    return atom, load_cell(params["cell"])


def _fields(params: dict) -> tuple[FieldSpec, FieldSpec]:
    coupling = FieldSpec.from_intensity(
        "coupling", params["coupling_intensity_w_m2"],
        detuning=TWO_PI * params["delta_c_hz"])
    probe = FieldSpec.from_intensity("probe", params["probe_intensity_w_m2"])
    return coupling, probe


def _linspace(spec) -> np.ndarray:
    start, stop, count = spec
    return np.linspace(float(start), float(stop), int(count))


def _read_xy(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column numeric CSV; comment lines and a single header line allowed."""
    xs: list[float] = []
    ys: list[float] = []
    header_seen = False
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DomainError(f"{path}:{lineno}: expected x,y columns")
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                if not xs and not header_seen:
                    header_seen = True
                    continue
                raise DomainError(
                    f"{path}:{lineno}: non-numeric row {line!r}") from None
            xs.append(x)
            ys.append(y)
    if len(xs) < 2:
        raise DomainError(f"{path}: need at least 2 data rows")
    return np.asarray(xs), np.asarray(ys)


# ---------------------------------------------------------------------------
# subcommand handlers (params dict in, input digests out)


def _cmd_spectrum(params: dict, manifest_name: str) -> dict:
    atom, cell = _resolve_model(params)
    coupling, probe = _fields(params)
    grid = TWO_PI * _linspace(params["probe_grid_hz"])
    spectrum = eit_spectrum(atom, cell, coupling, probe, grid)
    out = Path(params["out"])
    _write_csv(out, manifest_name, ["delta_p_hz", "alpha_p"],
               zip(spectrum.detunings_hz, spectrum.absorption))
    print(f"wrote {out} ({len(grid)} points)")
    return _digest_sources(params["atom"], params["cell"])


def _cmd_series(params: dict, manifest_name: str) -> dict:
    atom, cell = _resolve_model(params)
    coupling = FieldSpec.from_intensity("coupling",
                                        params["coupling_intensity_w_m2"])
    probe = FieldSpec.from_intensity("probe", params["probe_intensity_w_m2"])
    delta_cs = TWO_PI * np.asarray(params["delta_cs_hz"], dtype=float)
    relative = TWO_PI * _linspace(params["relative_grid_hz"])
    spectra = detuning_series(atom, cell, coupling, probe, delta_cs, relative)

    out = Path(params["out"])
    summary_rows = []
    for index, spectrum in enumerate(spectra):
        member = out.with_name(f"{out.stem}_{index:02d}.csv")
        _write_csv(member, manifest_name, ["delta_p_hz", "alpha_p"],
                   zip(spectrum.detunings_hz, spectrum.absorption))
        try:
            fwhm = extract_fwhm(spectrum)
        except SpectrumError:
            fwhm = float("nan")
        summary_rows.append((params["delta_cs_hz"][index], fwhm,
                             asymmetry(spectrum),
                             net_transparency(spectrum)))
    summary = out.with_name(f"{out.stem}_summary.csv")
    _write_csv(summary, manifest_name,
               ["delta_c_hz", "fwhm_hz", "asymmetry", "net_transparency"],
               summary_rows)
    print(f"wrote {len(spectra)} spectra and {summary}")
    return _digest_sources(params["atom"], params["cell"])


def _cmd_linewidth_scan(params: dict, manifest_name: str) -> dict:
    atom, cell = _resolve_model(params)
    probe = FieldSpec.from_intensity("probe", params["probe_intensity_w_m2"])
    table = linewidth_vs_intensity(atom, cell, params["intensities_w_m2"], probe,
                                   delta_c=TWO_PI * params["delta_c_hz"],
                                   grid_points=params["grid_points"])
    out = Path(params["out"])
    _write_csv(out, manifest_name, ["intensity_w_m2", "fwhm_hz"], table)

    fit = fit_curve("linear", table[:, 0], table[:, 1])
    report = fit.to_report()
    if fit.converged:
        report["sigmas"] = {
            name: float(v) for name, v in
            zip(MODEL_SHAPES["linear"].param_names,
                fit_uncertainty(fit, table[:, 0], table[:, 1]))
        }
    fit_path = out.with_name(f"{out.stem}_fit.json")
    _write_json(fit_path, manifest_name, {
        "fit": report,
        "intercept_hz": fit["intercept"],
        "slope_hz_per_w_m2": fit["slope"],
    })
    print(f"wrote {out} and {fit_path} "
          f"(intercept {fit['intercept']:.6g} Hz)")
    return _digest_sources(params["atom"], params["cell"])


def _cmd_broadening(params: dict, manifest_name: str) -> dict:
    atom = load_atom(params["atom"])
    cell = load_cell(params["cell"])
    rows = broadening_budget(atom, cell, angle=params["angle_rad"])
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value:.6g}")
    out = Path(params["out"])
    _write_csv(out, manifest_name, ["mechanism", "value"],
               [(label, value) for label, value in rows])
    print(f"wrote {out}")
    return _digest_sources(params["atom"], params["cell"])


def _cmd_storage(params: dict, manifest_name: str) -> dict:
    atom, cell = _resolve_model(params)
    coupling, probe = _fields(params)
    base_seq = PulseSequence(
        storage_time=0.0,
        probe_duration=params["probe_duration_s"],
        probe_rise=params["probe_rise_s"],
        prepare_duration=params["prepare_duration_s"],
        retrieval_window=params["retrieval_window_s"],
        sample_step=params["sample_step_s"],
    )
    times = [float(t) for t in params["storage_times_s"]]
    results = []
    for storage_time in times:
        seq = PulseSequence(
            storage_time=storage_time,
            probe_duration=base_seq.probe_duration,
            probe_rise=base_seq.probe_rise,
            prepare_duration=base_seq.prepare_duration,
            retrieval_window=base_seq.retrieval_window,
            sample_step=base_seq.sample_step,
        )
        results.append(simulate_storage(atom, cell, coupling, probe, seq))

    out = Path(params["out"])
    _write_csv(out, manifest_name, ["storage_time_s", "efficiency"],
               [(t, r.efficiency) for t, r in zip(times, results)])

    envelopes = out.with_name(f"{out.stem}_envelopes.csv")
    env_header = ["time_s"] + [f"signal_{i:02d}" for i in range(len(results))]
    env_rows = zip(results[0].times, *[r.signal for r in results])
    _write_csv(envelopes, manifest_name, env_header, env_rows)
    written = [str(out), str(envelopes)]

    payload: dict = {"predicted_lifetime_s": None, "fit": None}
    if cell.intercept_b > 0:
        payload["predicted_lifetime_s"] = predicted_lifetime(cell)
    if len(times) >= 6:
        fit = lifetime_scan(atom, cell, coupling, probe, times, sequence=base_seq)
        payload["fit"] = fit.to_report()
        payload["fitted_lifetime_s"] = fit["tau"]
    else:
        print("fewer than 6 storage times: skipping the lifetime fit")
    if params["temperature_k"] is not None:
        payload["temperature_k"] = params["temperature_k"]
        payload["od_estimate"] = od_estimate(params["temperature_k"])
    fit_path = out.with_name(f"{out.stem}_fit.json")
    _write_json(fit_path, manifest_name, payload)
    written.append(str(fit_path))

    if params["trajectory"] is not None:
        traj_path = Path(params["trajectory"])
        _write_trajectory(traj_path, manifest_name, atom, cell, coupling, probe,
                          base_seq)
        written.append(str(traj_path))
    print("wrote " + ", ".join(written))
    return _digest_sources(params["atom"], params["cell"])


def _write_trajectory(path: Path, manifest_name: str, atom, cell,
                      coupling: FieldSpec, probe: FieldSpec,
                      seq: PulseSequence) -> None:
    """Write-phase trajectory: populations plus the working coherences."""
    from .bloch import DensityMatrix
    from .storage import _probe_envelope

    gen = build_generator(atom, cell, coupling, probe)
    state = DensityMatrix.ground_mixture()
    if seq.prepare_duration > 0.0:
        state = evolve_constant(gen, state, seq.prepare_duration,
                                probe_on=False, coupling_on=True).final()
    times = np.linspace(0.0, seq.probe_duration, _TRAJECTORY_SAMPLES)
    traj = time_evolve(gen, state, times,
                       probe_envelope=_probe_envelope(seq.probe_duration,
                                                      seq.probe_rise))
    header = ["time_s", "rho11", "rho22", "rho33", "rho44",
              "re_sigma12", "im_sigma12", "re_sigma14", "im_sigma14"]
    rows = []
    for i, t in enumerate(traj.times):
        rho = traj.states[i]
        rows.append((t, rho[0, 0].real, rho[1, 1].real, rho[2, 2].real,
                     rho[3, 3].real, rho[0, 1].real, rho[0, 1].imag,
                     rho[0, 3].real, rho[0, 3].imag))
    _write_csv(path, manifest_name, header, rows)


def _cmd_fit(params: dict, manifest_name: str) -> dict:
    data_path = Path(params["data"])
    if not data_path.is_file():
        raise DomainError(f"data file not found: {data_path}")
    x, y = _read_xy(data_path)
    init = params["init"]
    fit = fit_curve(params["shape"], x, y,
                    init=None if init is None else np.asarray(init, dtype=float))
    report = fit.to_report()
    if fit.converged:
        names = MODEL_SHAPES[params["shape"]].param_names
        report["sigmas"] = {
            name: float(v) for name, v in zip(names, fit_uncertainty(fit, x, y))
        }
        if params["bootstrap"] > 0:
            boot = bootstrap_sigmas(params["shape"], x, y, fit,
                                    n_resamples=params["bootstrap"], seed=0)
            report["bootstrap_sigmas"] = {
                name: float(v) for name, v in zip(names, boot)
            }
    else:
        print("warning: fit did not converge; report is flagged")
    out = Path(params["out"])
    _write_json(out, manifest_name, {"data": str(data_path), "fit": report})
    print(f"wrote {out} (rms {fit.rms:.6g})")
    return _digest_sources(params["data"])


def _cmd_analyze(params: dict, manifest_name: str) -> dict:
    signal = average_traces(load_traces(params["signal"], "I"))
    reference = average_traces(load_traces(params["reference"], "I0"))
    background = average_traces(load_traces(params["background"], "B"))
    od = beer_lambert_od(signal, reference, background)
    out = Path(params["out"])
    _write_csv(out, manifest_name, ["delta_p_hz", "od"], zip(signal.x, od))
    print(f"wrote {out} ({len(od)} points)")
    return _digest_sources(params["signal"], params["reference"],
                           params["background"])


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "series": _cmd_series,
    "linewidth-scan": _cmd_linewidth_scan,
    "broadening": _cmd_broadening,
    "storage": _cmd_storage,
    "fit": _cmd_fit,
    "analyze": _cmd_analyze,
}


# ---------------------------------------------------------------------------
# argument parsing and parameter resolution


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitmem",
        description="EIT spectra, linewidth scans, and light-storage simulation "
                    "for a warm rubidium vapor model.",
        epilog="Replay a previous run with: eitmem --from-manifest RUN.manifest.json",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")

    model_parent = argparse.ArgumentParser(add_help=False)
    model_parent.add_argument("--model", choices=("three-level", "four-level"),
                              default="four-level",
                              help="level scheme variant (default %(default)s)")
    model_parent.add_argument("--cell", default="ne-5torr",
                              help="cell preset name or JSON file (default %(default)s)")
    model_parent.add_argument("--atom", default="rb85-d1",
                              help="atom preset name or JSON file (default %(default)s)")
    model_parent.add_argument("--probe-intensity", type=float,
                              default=CALIBRATION_INTENSITY, metavar="W_M2",
                              help="probe intensity in W/m^2 (default %(default)s)")

    coupling_parent = argparse.ArgumentParser(add_help=False)
    coupling_parent.add_argument("--coupling-intensity", type=float,
                                 default=DEFAULT_COUPLING_INTENSITY, metavar="W_M2",
                                 help="coupling intensity in W/m^2 "
                                      "(default %(default).6g)")

    sub = parser.add_subparsers(dest="subcommand", required=True,
                                metavar="SUBCOMMAND")

    p_spectrum = sub.add_parser(
        "spectrum", parents=[model_parent, coupling_parent],
        help="steady-state probe absorption spectrum")
    p_spectrum.add_argument("--delta-c", type=float, default=0.0, metavar="HZ",
                            help="coupling detuning in Hz (default %(default)s)")
    p_spectrum.add_argument("--probe-grid", type=_grid_spec,
                            default="-100e3:100e3:2001", metavar="START:STOP:N",
                            help="probe detuning grid in Hz (default %(default)s)")
    p_spectrum.add_argument("--out", default="spectrum.csv",
                            help="output CSV path (default %(default)s)")

    p_series = sub.add_parser(
        "series", parents=[model_parent, coupling_parent],
        help="spectra over a coupling-detuning progression")
    p_series.add_argument("--delta-c", type=_grid_spec,
                          default="-800e6:800e6:9", metavar="START:STOP:N",
                          help="coupling detunings in Hz (default %(default)s)")
    p_series.add_argument("--probe-grid", type=_grid_spec,
                          default="-40e3:40e3:1201", metavar="START:STOP:N",
                          help="probe grid in Hz relative to each two-photon "
                               "resonance (default %(default)s)")
    p_series.add_argument("--out", default="series.csv",
                          help="base path; member and summary CSVs derive from "
                               "its stem (default %(default)s)")

    p_linewidth = sub.add_parser(
        "linewidth-scan", parents=[model_parent],
        help="EIT linewidth versus coupling intensity with a linear fit")
    p_linewidth.add_argument("--intensities", type=_grid_spec,
                             default="1.5:25:8", metavar="START:STOP:N",
                             help="coupling intensities in W/m^2 (default %(default)s)")
    p_linewidth.add_argument("--delta-c", type=float, default=0.0, metavar="HZ",
                             help="coupling detuning in Hz (default %(default)s)")
    p_linewidth.add_argument("--grid-points", type=int, default=4001,
                             help="points per spectrum (default %(default)s)")
    p_linewidth.add_argument("--out", default="linewidth.csv",
                             help="output CSV path (default %(default)s)")

    p_broadening = sub.add_parser(
        "broadening", help="print and export the broadening budget of a cell")
    p_broadening.add_argument("--cell", default="ne-5torr",
                              help="cell preset name or JSON file (default %(default)s)")
    p_broadening.add_argument("--atom", default="rb85-d1",
                              help="atom preset name or JSON file (default %(default)s)")
    p_broadening.add_argument("--angle", type=float, default=0.0, metavar="RAD",
                              help="probe-coupling angle in radians (default %(default)s)")
    p_broadening.add_argument("--out", default="broadening.csv",
                              help="output CSV path (default %(default)s)")

    p_storage = sub.add_parser(
        "storage", parents=[model_parent, coupling_parent],
        help="light-storage efficiency versus storage time")
    p_storage.add_argument("--delta-c", type=float, default=0.0, metavar="HZ",
                           help="coupling detuning in Hz (default %(default)s)")
    p_storage.add_argument("--storage-times", type=_grid_spec, default=None,
                           metavar="START:STOP:N",
                           help="storage times in seconds; default spans "
                                "2.5 predicted lifetimes in 8 points")
    p_storage.add_argument("--probe-duration", type=float, default=10e-6,
                           metavar="S", help="probe pulse length (default %(default)s)")
    p_storage.add_argument("--probe-rise", type=float, default=2.5e-6,
                           metavar="S", help="probe edge time constant "
                                             "(default %(default)s)")
    p_storage.add_argument("--prepare-duration", type=float, default=50e-6,
                           metavar="S", help="coupling-only preparation time "
                                             "(default %(default)s)")
    p_storage.add_argument("--retrieval-window", type=float, default=30e-6,
                           metavar="S", help="retrieval integration window "
                                             "(default %(default)s)")
    p_storage.add_argument("--sample-step", type=float, default=0.1e-6,
                           metavar="S", help="retrieval sampling step "
                                             "(default %(default)s)")
    p_storage.add_argument("--temperature", type=float, default=None, metavar="K",
                           help="if given, report the optical-depth estimate at "
                                "this cell temperature")
    p_storage.add_argument("--trajectory", default=None, metavar="PATH",
                           help="also export the write-phase trajectory CSV")
    p_storage.add_argument("--out", default="storage.csv",
                           help="efficiency CSV path; envelope and fit artifacts "
                                "derive from its stem (default %(default)s)")

    p_fit = sub.add_parser("fit", help="fit a model shape to a two-column CSV")
    p_fit.add_argument("--shape", required=True, choices=sorted(MODEL_SHAPES),
                       help="model shape")
    p_fit.add_argument("--data", required=True, help="input CSV with x,y rows")
    p_fit.add_argument("--init", type=_init_list, default=None, metavar="V1,V2,...",
                       help="initial parameters (default: shape heuristic)")
    p_fit.add_argument("--bootstrap", type=int, default=0, metavar="N",
                       help="residual-bootstrap resamples for uncertainties "
                            "(default %(default)s)")
    p_fit.add_argument("--out", default="fit.json",
                       help="report JSON path (default %(default)s)")

    p_analyze = sub.add_parser(
        "analyze", help="average raw traces and compute optical depth")
    p_analyze.add_argument("--signal", required=True,
                           help="trace CSV or directory, role I")
    p_analyze.add_argument("--reference", required=True,
                           help="trace CSV or directory, role I0")
    p_analyze.add_argument("--background", required=True,
                           help="trace CSV or directory, role B")
    p_analyze.add_argument("--out", default="od.csv",
                           help="output CSV path (default %(default)s)")

    for sub_parser in (parser, p_spectrum, p_series, p_linewidth, p_broadening,
                       p_storage, p_fit, p_analyze):
        _accept_negative_values(sub_parser)
    return parser


def _default_storage_times(cell) -> list[float]:
    # Start past zero: the zero-delay retrieval still carries optical-coherence
    # transients, which would bias an exponential fit anchored there.
    if cell.intercept_b > 0:
        tau = predicted_lifetime(cell)
        return [float(t) for t in np.linspace(0.1 * tau, 2.6 * tau, 8)]
    return [float(t) for t in np.linspace(5e-6, 55e-6, 8)]


def _resolve_params(args: argparse.Namespace) -> dict:
    """Turn a parsed namespace into the canonical parameter dict of the run."""
    sub = args.subcommand
    if sub == "spectrum":
        return {
            "atom": args.atom, "cell": args.cell, "model": args.model,
            "coupling_intensity_w_m2": args.coupling_intensity,
            "probe_intensity_w_m2": args.probe_intensity,
            "delta_c_hz": args.delta_c,
            "probe_grid_hz": list(args.probe_grid),
            "out": args.out,
        }
    if sub == "series":
        start, stop, count = args.delta_c
        return {
            "atom": args.atom, "cell": args.cell, "model": args.model,
            "coupling_intensity_w_m2": args.coupling_intensity,
            "probe_intensity_w_m2": args.probe_intensity,
            "delta_cs_hz": [float(v) for v in np.linspace(start, stop, count)],
            "relative_grid_hz": list(args.probe_grid),
            "out": args.out,
        }
    if sub == "linewidth-scan":
        start, stop, count = args.intensities
        return {
            "atom": args.atom, "cell": args.cell, "model": args.model,
            "probe_intensity_w_m2": args.probe_intensity,
            "intensities_w_m2": [float(v) for v in np.linspace(start, stop, count)],
            "delta_c_hz": args.delta_c,
            "grid_points": args.grid_points,
            "out": args.out,
        }
    if sub == "broadening":
        return {
            "atom": args.atom, "cell": args.cell,
            "angle_rad": args.angle, "out": args.out,
        }
    if sub == "storage":
        if args.storage_times is None:
            times = _default_storage_times(load_cell(args.cell))
        else:
            start, stop, count = args.storage_times
            times = [float(t) for t in np.linspace(start, stop, count)]
        return {
            "atom": args.atom, "cell": args.cell, "model": args.model,
            "coupling_intensity_w_m2": args.coupling_intensity,
            "probe_intensity_w_m2": args.probe_intensity,
            "delta_c_hz": args.delta_c,
            "storage_times_s": times,
            "probe_duration_s": args.probe_duration,
            "probe_rise_s": args.probe_rise,
            "prepare_duration_s": args.prepare_duration,
            "retrieval_window_s": args.retrieval_window,
            "sample_step_s": args.sample_step,
            "temperature_k": args.temperature,
            "trajectory": args.trajectory,
            "out": args.out,
        }
    if sub == "fit":
        return {
            "shape": args.shape, "data": args.data, "init": args.init,
            "bootstrap": args.bootstrap, "out": args.out,
        }
    if sub == "analyze":
        return {
            "signal": args.signal, "reference": args.reference,
            "background": args.background, "out": args.out,
        }
    raise DomainError(f"unknown subcommand {sub!r}")


def _run(subcommand: str, params: dict, write_manifest: bool) -> int:
    handler = _HANDLERS.get(subcommand)
    if handler is None:
        print(f"error: unknown subcommand {subcommand!r}", file=sys.stderr)
        return 2
    manifest_path = _manifest_path(params["out"])
    try:
        digests = handler(params, manifest_path.name)
    except (DomainError, TraceFormatError, FitError, SpectrumError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    if write_manifest:
        manifest = {
            "tool": "eitmem",
            "tool_version": __version__,
            "subcommand": subcommand,
            "parameters": params,
            "presets": {key: params[key] for key in ("atom", "cell")
                        if key in params},
            "input_digests": digests,
            "created_utc": datetime.now(timezone.utc)
                                   .strftime("%Y-%m-%dT%H:%M:%SZ"),
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True)
                                 + "\n", encoding="utf-8")
        print(f"manifest: {manifest_path}")
    return 0


def _replay(manifest_file: str) -> int:
    try:
        manifest = json.loads(Path(manifest_file).read_text(encoding="utf-8"))
        subcommand = manifest["subcommand"]
        params = manifest["parameters"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot replay {manifest_file!r}: {exc!r}", file=sys.stderr)
        return 2
    # The manifest already describes this run; only the data artifacts are
    # rewritten, so a replay is byte-identical across the board.
    return _run(subcommand, params, write_manifest=False)


def main(argv=None) -> int:
    args_list = list(sys.argv[1:] if argv is None else argv)
    if args_list and args_list[0] == "--from-manifest":
        if len(args_list) != 2:
            print("usage: eitmem --from-manifest RUN.manifest.json", file=sys.stderr)
            return 2
        return _replay(args_list[1])
    parser = _build_parser()
    try:
        args = parser.parse_args(args_list)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0
    try:
        params = _resolve_params(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return _run(args.subcommand, params, write_manifest=True)


if __name__ == "__main__":
    sys.exit(main())
