"""Trace-file ingestion, averaging, and Beer-Lambert optical depth.

Trace CSV schema (invented here; instruments describe signals, not files):
each trace block starts with a comment header

    # x_unit=<unit> role=<role> run_id=<id>

followed by ``x,value`` rows in full double precision.  A file may hold many
blocks; a directory of ``*.csv`` files is read in sorted order.  Roles follow
the measurement protocol: ``I`` for the transmission signal, ``I0`` for the
off-resonant reference, ``B`` for the background.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.constants import k as K_B

from .atoms import DomainError

__all__ = [
    "TraceSet", "TraceFormatError", "load_traces", "average_traces",
    "beer_lambert_od", "od_estimate", "write_traces",
]

_HEADER_RE = re.compile(
    r"^#\s*x_unit=(?P<x_unit>\S+)\s+role=(?P<role>\S+)\s+run_id=(?P<run_id>\S+)\s*$")


class TraceFormatError(ValueError):
    """A trace file violates the CSV schema."""


@dataclass(frozen=True)
class TraceSet:
    """N traces sharing one x-grid, one role, and one x-unit."""

    x: np.ndarray
    values: np.ndarray      # shape (N, len(x))
    role: str
    x_unit: str
    run_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if x.ndim != 1 or values.shape[1] != len(x):
            raise DomainError("trace values must be shaped (N, len(x))")
        if values.shape[0] < 1:
            raise DomainError("a TraceSet needs at least one trace")
        if len(self.run_ids) != values.shape[0]:
            raise DomainError("one run_id per trace required")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(values))):
            raise DomainError("trace samples must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


def _parse_blocks(path: Path) -> list[dict]:
    """All trace blocks in one file, with schema errors tied to line numbers."""
    blocks: list[dict] = []
    current: dict | None = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _HEADER_RE.match(line)
            if match is None:
                raise TraceFormatError(
                    f"{path}:{lineno}: malformed header, expected "
                    f"'# x_unit=<unit> role=<role> run_id=<id>'")
            current = {**match.groupdict(), "x": [], "v": [], "line": lineno}
            blocks.append(current)
            continue
        if current is None:
            raise TraceFormatError(f"{path}:{lineno}: data row before any trace header")
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFormatError(
                f"{path}:{lineno}: expected two comma-separated values, got {line!r}")
        try:
            current["x"].append(float(parts[0]))
            current["v"].append(float(parts[1]))
        except ValueError:
            raise TraceFormatError(f"{path}:{lineno}: non-numeric sample {line!r}") from None
    for block in blocks:
        if not block["x"]:
            raise TraceFormatError(f"{path}:{block['line']}: trace block has no samples")
    return blocks


def load_traces(source: str | Path, role: str) -> TraceSet:
    """Read every trace with the given role from a file or a directory of files.

    All selected traces must share the exact same x-grid; mismatches are
    reported with the indices of the offending traces.
    """
    path = Path(source)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise TraceFormatError(f"no *.csv files in {path}")
    elif path.is_file():
        files = [path]
    else:
        raise TraceFormatError(f"{path} is neither a file nor a directory")

    blocks = [b for f in files for b in _parse_blocks(f) if b["role"] == role]
    if not blocks:
        raise TraceFormatError(f"no traces with role {role!r} under {path}")
    units = {b["x_unit"] for b in blocks}
    if len(units) > 1:
        raise TraceFormatError(f"role {role!r} mixes x units {sorted(units)}")

    x0 = np.asarray(blocks[0]["x"], dtype=float)
    mismatched = [i for i, b in enumerate(blocks)
                  if len(b["x"]) != len(x0) or not np.array_equal(b["x"], x0)]
    if mismatched:
        raise TraceFormatError(
            f"traces {mismatched} (role {role!r}) are not on the grid of trace 0")
    return TraceSet(
        x=x0,
        values=np.asarray([b["v"] for b in blocks], dtype=float),
        role=role,
        x_unit=blocks[0]["x_unit"],
        run_ids=tuple(b["run_id"] for b in blocks),
    )


def average_traces(traces: TraceSet) -> TraceSet:
    """Pointwise arithmetic mean, returned as a single-trace set."""
    return TraceSet(
        x=traces.x,
        values=traces.values.mean(axis=0)[None, :],
        role=traces.role,
        x_unit=traces.x_unit,
        run_ids=("average",),
    )


def _as_single_trace(trace, name: str) -> np.ndarray:
    if isinstance(trace, TraceSet):
        if len(trace) != 1:
            raise DomainError(f"{name} holds {len(trace)} traces; average it first")
        return trace.values[0]
    return np.asarray(trace, dtype=float)


def beer_lambert_od(signal, reference, background) -> np.ndarray:
    """Optical depth OD = -ln[(I - B)/(I0 - B)], pointwise.

    Arguments are single traces (1-d arrays or single-trace TraceSets) on a
    common grid.  Points where the background reaches the reference or the
    signal are errors, reported by index.
    """
    i_sig = _as_single_trace(signal, "signal")
    i_ref = _as_single_trace(reference, "reference")
    i_bg = _as_single_trace(background, "background")
    if not (i_sig.shape == i_ref.shape == i_bg.shape):
        raise DomainError("signal, reference, and background must share a grid")
    if (isinstance(signal, TraceSet) and isinstance(reference, TraceSet)
            and not np.array_equal(signal.x, reference.x)):
        raise DomainError("signal and reference traces are on different x-grids")

    denom = i_ref - i_bg
    bad = np.nonzero(denom <= 0.0)[0]
    if len(bad):
        raise DomainError(
            f"reference does not exceed background at point(s) {bad[:8].tolist()}")
    numer = i_sig - i_bg
    bad = np.nonzero(numer <= 0.0)[0]
    if len(bad):
        raise DomainError(
            f"background reaches the signal at point(s) {bad[:8].tolist()}")
    return -np.log(numer / denom)


#: Two-branch Rb vapor-pressure correlation, log10(P/torr) = a - b/T.
_VAPOR_SOLID = (7.738, 4215.0)
_VAPOR_LIQUID = (7.193, 4040.0)
_MELTING_POINT_K = 312.45
_TORR_TO_PA = 133.32236842105263

_OD_ANCHOR_T = 295.0
_OD_ANCHOR_VALUE = 0.75
_OD_ANCHOR_LENGTH = 0.075


def _number_density(temperature: float) -> float:
    a, b = _VAPOR_SOLID if temperature < _MELTING_POINT_K else _VAPOR_LIQUID
    pressure = _TORR_TO_PA * 10.0 ** (a - b / temperature)
    return pressure / (K_B * temperature)


def od_estimate(temperature: float, cell_length: float = _OD_ANCHOR_LENGTH) -> float:
    """Resonant optical depth scale of a Rb cell at the given temperature.

    Vapor density comes from the standard two-branch (solid/liquid) pressure
    correlation; a single multiplicative constant calibrates the result to
    OD = 0.75 at 295 K for the default cell length, absorbing beam and
    transition factors.  Valid for 273 K to 350 K.
    """
    if not 273.0 <= temperature <= 350.0:
        raise DomainError("od_estimate is calibrated for 273 K to 350 K")
    if cell_length <= 0.0:
        raise DomainError("cell length must be positive")
    anchor = _number_density(_OD_ANCHOR_T) * _OD_ANCHOR_LENGTH
    return _OD_ANCHOR_VALUE * _number_density(temperature) * cell_length / anchor


def write_traces(path: str | Path, traces: TraceSet) -> None:
    """Write a TraceSet in the block schema read by load_traces."""
    lines = []
    for run_id, row in zip(traces.run_ids, traces.values):
        lines.append(f"# x_unit={traces.x_unit} role={traces.role} run_id={run_id}")
        lines.extend(f"{float(x)!r},{float(v)!r}" for x, v in zip(traces.x, row))
    Path(path).write_text("\n".join(lines) + "\n")
