import numpy as np
import pytest

from eitmem import FieldSpec, default_rb85_d1, load_cell
from eitmem.atoms import CellSpec, intensity_of_field


@pytest.fixture(scope="session")
def atom():
    return default_rb85_d1()


@pytest.fixture(scope="session")
def ne_cell():
    return load_cell("ne-5torr")


@pytest.fixture(scope="session")
def alkene_cell():
    return load_cell("alkene")


@pytest.fixture(scope="session")
def paraffin_cell():
    return load_cell("paraffin")


@pytest.fixture(scope="session")
def coupling_64():
    """Coupling field at the 64 V/m working point."""
    return FieldSpec.from_intensity("coupling", intensity_of_field(64.0))


@pytest.fixture(scope="session")
def weak_probe():
    return FieldSpec.from_intensity("probe", 0.028)


def make_cell(b=0.0, doppler=0.0, pressure=0.0, kind="vacuum", **kwargs):
    """Bare cell for oracle setups where each dephasing is dialed by hand."""
    return CellSpec(name="test", kind=kind, intercept_b=b,
                    doppler_dephasing=doppler, pressure_dephasing=pressure,
                    **kwargs)


def random_density_matrix(rng: np.random.Generator) -> np.ndarray:
    raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = raw @ raw.conj().T
    return rho / np.trace(rho).real
