import numpy as np
import pytest

from tractionlab import Density, LoadSpec, assemble_loads, pressure, rect_mesh
from tractionlab.loads import TractionRule

SIDES = ("left", "right", "top", "bottom")


def pressure_spec(p):
    return LoadSpec({tag: pressure(p) for tag in SIDES})


def infmany_spec():
    return LoadSpec({
        "right": TractionRule("constant", (0.0, 1.0)),
        "left": TractionRule("constant", (0.0, -1.0)),
        "top": TractionRule("constant", (1.0, 0.0)),
        "bottom": TractionRule("constant", (-1.0, 0.0)),
    })


def zero_spec():
    return LoadSpec({tag: TractionRule("constant", (0.0, 0.0)) for tag in SIDES})


@pytest.fixture(scope="session")
def mesh8():
    return rect_mesh(8, 8)


@pytest.fixture(scope="session")
def mesh16():
    return rect_mesh(16, 16)


@pytest.fixture(scope="session")
def density11():
    return Density(1.0, 1.0)


@pytest.fixture(scope="session")
def tension16(mesh16):
    return assemble_loads(mesh16, pressure_spec(16.0))


@pytest.fixture(scope="session")
def compression16(mesh16):
    return assemble_loads(mesh16, pressure_spec(-1.0))


@pytest.fixture(scope="session")
def infmany16(mesh16):
    return assemble_loads(mesh16, infmany_spec())


def random_field_values(mesh, rng, amplitude=1.0):
    return amplitude * rng.standard_normal((mesh.n_nodes, 2))


def admissible_field(mesh, rng, h, amplitude=0.5):
    """Random nodal field scaled until every element keeps orientation safely."""
    from tractionlab.fem import DisplacementField, element_gradients

    values = random_field_values(mesh, rng, amplitude)
    for _ in range(60):
        G = element_gradients(mesh, values)
        F00 = 1.0 + h * G[:, 0, 0]
        F11 = 1.0 + h * G[:, 1, 1]
        dets = F00 * F11 - h * h * G[:, 0, 1] * G[:, 1, 0]
        if np.all(dets > 0.25):
            return DisplacementField(mesh, values)
        values *= 0.5
    raise AssertionError("could not produce an admissible random field")
