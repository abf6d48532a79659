"""Named presets and JSON (de)serialization for atom and cell specs.

Serialized documents carry all rates in ordinary Hz; the 2*pi conversion to
angular units happens here, at load time, and is reversed at save time.  A
document is a JSON object with a ``"type"`` field ("atom" or "cell") plus the
fields listed in the schema dictionaries below.
"""

from __future__ import annotations

import json
from pathlib import Path

from .atoms import (
    DEFAULT_DIPOLE,
    MASS_RB85,
    TWO_PI,
    WAVELENGTH_D1,
    AtomSpec,
    CellSpec,
    DomainError,
    default_rb85_d1,
)

ATOM_PRESETS = ("rb85-d1",)
CELL_PRESETS = ("ne-5torr", "alkene", "paraffin", "reference")


def _cell_presets() -> dict[str, CellSpec]:
    common = dict(beam_radius=2.8e-3, cell_radius=12.5e-3, cell_length=75e-3,
                  temperature=295.0)
    return {
        # 5 Torr of Ne buffer gas: slow diffusion through the beam, extra
        # pressure broadening of the optical coherences.
        "ne-5torr": CellSpec(
            name="ne-5torr", kind="buffer-gas", intercept_b=1.5e3,
            doppler_dephasing=500e6, pressure_dephasing=25e6,
            pressure_torr=5.0, diffusion=30e-4, **common),
        "alkene": CellSpec(
            name="alkene", kind="coated", intercept_b=16e3,
            doppler_dephasing=500e6, **common),
        "paraffin": CellSpec(
            name="paraffin", kind="coated", intercept_b=33.3e3,
            doppler_dephasing=500e6, **common),
        # Uncoated, evacuated cell.  Its ground-state coherence is limited by
        # the ballistic transit time, not wall or buffer-gas collisions; b here
        # is an effective value matched to the transit-limited feature width
        # (~190 kHz FWHM), since the model has a single ground-dephasing knob.
        "reference": CellSpec(
            name="reference", kind="vacuum", intercept_b=190e3,
            doppler_dephasing=500e6, **common),
    }


def atom_preset(name: str) -> AtomSpec:
    if name == "rb85-d1":
        return default_rb85_d1()
    raise DomainError(f"unknown atom preset {name!r}, expected one of {ATOM_PRESETS}")


def cell_preset(name: str) -> CellSpec:
    presets = _cell_presets()
    if name not in presets:
        raise DomainError(f"unknown cell preset {name!r}, expected one of {CELL_PRESETS}")
    return presets[name]


def atom_to_dict(atom: AtomSpec) -> dict:
    return {
        "type": "atom",
        "name": atom.name,
        "ground_splitting_hz": atom.ground_splitting / TWO_PI,
        "excited_splitting_hz": atom.excited_splitting / TWO_PI,
        "gamma3_hz": atom.gamma3 / TWO_PI,
        "gamma4_hz": atom.gamma4 / TWO_PI,
        "dipole_13_cm": atom.dipole_13,
        "dipole_14_cm": atom.dipole_14,
        "dipole_23_cm": atom.dipole_23,
        "dipole_24_cm": atom.dipole_24,
        "mass_kg": atom.mass,
        "wavelength_m": atom.wavelength,
    }


def atom_from_dict(doc: dict) -> AtomSpec:
    try:
        return AtomSpec(
            name=str(doc.get("name", "custom")),
            ground_splitting=TWO_PI * float(doc["ground_splitting_hz"]),
            excited_splitting=TWO_PI * float(doc["excited_splitting_hz"]),
            gamma3=TWO_PI * float(doc["gamma3_hz"]),
            gamma4=TWO_PI * float(doc["gamma4_hz"]),
            dipole_13=float(doc.get("dipole_13_cm", DEFAULT_DIPOLE)),
            dipole_14=float(doc.get("dipole_14_cm", DEFAULT_DIPOLE)),
            dipole_23=float(doc.get("dipole_23_cm", DEFAULT_DIPOLE)),
            dipole_24=float(doc.get("dipole_24_cm", DEFAULT_DIPOLE)),
            mass=float(doc.get("mass_kg", MASS_RB85)),
            wavelength=float(doc.get("wavelength_m", WAVELENGTH_D1)),
        )
    except KeyError as exc:
        raise DomainError(f"atom document missing field {exc.args[0]!r}") from None


def cell_to_dict(cell: CellSpec) -> dict:
    return {
        "type": "cell",
        "name": cell.name,
        "kind": cell.kind,
        "intercept_b_hz": cell.intercept_b,
        "doppler_dephasing_hz": cell.doppler_dephasing,
        "pressure_dephasing_hz": cell.pressure_dephasing,
        "gamma34_coll_hz": cell.gamma34_coll_hz,
        "pressure_torr": cell.pressure_torr,
        "diffusion_m2_s": cell.diffusion,
        "beam_radius_m": cell.beam_radius,
        "cell_radius_m": cell.cell_radius,
        "cell_length_m": cell.cell_length,
        "temperature_k": cell.temperature,
    }


def cell_from_dict(doc: dict) -> CellSpec:
    try:
        g34 = doc.get("gamma34_coll_hz")
        return CellSpec(
            name=str(doc.get("name", "custom")),
            kind=str(doc["kind"]),
            intercept_b=float(doc["intercept_b_hz"]),
            doppler_dephasing=float(doc["doppler_dephasing_hz"]),
            pressure_dephasing=float(doc.get("pressure_dephasing_hz", 0.0)),
            gamma34_coll_hz=None if g34 is None else float(g34),
            pressure_torr=float(doc.get("pressure_torr", 0.0)),
            diffusion=float(doc.get("diffusion_m2_s", 0.0)),
            beam_radius=float(doc.get("beam_radius_m", 2.8e-3)),
            cell_radius=float(doc.get("cell_radius_m", 12.5e-3)),
            cell_length=float(doc.get("cell_length_m", 75e-3)),
            temperature=float(doc.get("temperature_k", 295.0)),
        )
    except KeyError as exc:
        raise DomainError(f"cell document missing field {exc.args[0]!r}") from None


def load_cell(source: str | Path) -> CellSpec:
    """Resolve a cell: preset name, or path to a JSON document."""
    if isinstance(source, str) and source in CELL_PRESETS:
        return cell_preset(source)
    path = Path(source)
    if not path.exists():
        raise DomainError(
            f"{source!r} is neither a cell preset {CELL_PRESETS} nor an existing file")
    doc = json.loads(path.read_text())
    if doc.get("type") != "cell":
        raise DomainError(f"{path} is not a cell document (type={doc.get('type')!r})")
    return cell_from_dict(doc)


def load_atom(source: str | Path) -> AtomSpec:
    """Resolve an atom: preset name, or path to a JSON document."""
    if isinstance(source, str) and source in ATOM_PRESETS:
        return atom_preset(source)
    path = Path(source)
    if not path.exists():
        raise DomainError(
            f"{source!r} is neither an atom preset {ATOM_PRESETS} nor an existing file")
    doc = json.loads(path.read_text())
    if doc.get("type") != "atom":
        raise DomainError(f"{path} is not an atom document (type={doc.get('type')!r})")
    return atom_from_dict(doc)


def save_spec(spec: AtomSpec | CellSpec, path: str | Path) -> None:
    doc = atom_to_dict(spec) if isinstance(spec, AtomSpec) else cell_to_dict(spec)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
