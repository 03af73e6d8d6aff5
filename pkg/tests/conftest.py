"""Shared test fixtures for coseg package tests."""

import logging
from pathlib import Path

import numpy as np
import pytest

from coseg.mesh import TriMesh
from coseg.spectral import SpectralBasis, compute_mesh_basis
from coseg.synthetic import DumbbellSpec, dumbbell, icosphere, tetrahedron, write_demo_set


@pytest.fixture
def tet() -> TriMesh:
    """Regular tetrahedron with unit edge length."""
    return tetrahedron(1.0)


@pytest.fixture
def tet_off(tmp_path: Path) -> Path:
    """OFF file of a regular tetrahedron."""
    path = tmp_path / "tet.off"
    path.write_text(
        "OFF\n"
        "4 4 6\n"
        "1 1 1\n"
        "1 -1 -1\n"
        "-1 1 -1\n"
        "-1 -1 1\n"
        "3 0 1 2\n"
        "3 0 3 1\n"
        "3 0 2 3\n"
        "3 1 3 2\n"
    )
    return path


@pytest.fixture(scope="session")
def sphere() -> TriMesh:
    """Unit icosphere, subdivision level 3 (642 vertices)."""
    return icosphere(3)


@pytest.fixture(scope="session")
def small_sphere() -> TriMesh:
    """Unit icosphere, subdivision level 2 (162 vertices)."""
    return icosphere(2, name="small-sphere")


@pytest.fixture(scope="session")
def sphere_basis(sphere: TriMesh) -> SpectralBasis:
    return compute_mesh_basis(sphere, 60)


@pytest.fixture(scope="session")
def barbell() -> tuple[TriMesh, np.ndarray]:
    """Dumbbell with unequal lobes and its per-vertex lobe ids."""
    return dumbbell(DumbbellSpec(), name="barbell")


@pytest.fixture(scope="session")
def barbell_basis(barbell: tuple[TriMesh, np.ndarray]) -> SpectralBasis:
    return compute_mesh_basis(barbell[0], 60)


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Synthetic four-dumbbell set with ground truth and demo.json."""
    directory = tmp_path_factory.mktemp("demo")
    write_demo_set(directory)
    return directory


@pytest.fixture
def clean_logger():
    """The coseg logger with no handlers, restored afterwards."""
    logger = logging.getLogger("coseg")
    saved = list(logger.handlers)
    logger.handlers.clear()
    yield logger
    for handler in logger.handlers:
        handler.close()
    logger.handlers[:] = saved
