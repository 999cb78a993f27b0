import numpy as np
import pytest

from lovebem import formulations
from lovebem import mesh as lbmesh
from lovebem.operators import SurfaceSpaces

DESK_FREQUENCY = 5e9
DESK_WAVENUMBER = 2.0 * np.pi * DESK_FREQUENCY / 2.99792458e8
SOURCE_RADIUS = 0.04
MEASURE_RADIUS = 0.09996


@pytest.fixture(scope="session")
def sphere_sub1():
    return lbmesh.generate_sphere(SOURCE_RADIUS, 1)


@pytest.fixture(scope="session")
def sphere_sub2():
    return lbmesh.generate_sphere(SOURCE_RADIUS, 2)


@pytest.fixture(scope="session")
def suite_coarse(sphere_sub1):
    """Source and measurement spheres one subdivision down from the desk size.

    Shared across modules: every kernel block is assembled at most once per
    pytest session.
    """
    return formulations.OperatorSuite(
        SurfaceSpaces(sphere_sub1),
        SurfaceSpaces(lbmesh.generate_sphere(MEASURE_RADIUS, 1)),
        k=DESK_WAVENUMBER,
    )


@pytest.fixture(scope="session")
def suite_fine(sphere_sub2):
    return formulations.OperatorSuite(
        SurfaceSpaces(sphere_sub2),
        SurfaceSpaces(lbmesh.generate_sphere(MEASURE_RADIUS, 2)),
        k=DESK_WAVENUMBER,
    )


@pytest.fixture(scope="session")
def tetra():
    vertices = np.array([
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ])
    triangles = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return lbmesh.TriangleMesh(vertices, triangles)


@pytest.fixture(scope="session")
def tetra_refined(tetra):
    return lbmesh.barycentric_refine(tetra)
