"""Discrete mesh Laplace operator as a symmetric stiffness / lumped mass pair.

The operator acts on a per-vertex function f as

    (L f)(w) = 1/(4 pi h^2) * sum_X Area(X)/3 * sum_{p in X} exp(-|p - w|^2 / 4h) (f(p) - f(w))

Aggregating the face sums per vertex gives weights m_p K(w, p). Using
S_ij = m_i m_j K_ij, Q = diag(row sums of S), A = Q - S and D = diag(m) makes
-D^-1 A reproduce L exactly while A stays symmetric, so the spectrum comes from
the generalized symmetric problem A f = lambda D f.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import EmptyKernelRow, LengthMismatch
from .mesh import TriMesh, vertex_lumped_mass

logger = logging.getLogger("coseg.laplace")

DEFAULT_H_FACTOR = 2.0
DEFAULT_TRUNCATION = 1e-9


@dataclass(frozen=True, eq=False)
class LaplaceSystem:
    """Sparse stiffness A and diagonal mass D of one mesh."""

    stiffness: sparse.csr_matrix
    mass: sparse.dia_matrix
    masses: np.ndarray
    h: float
    h_factor: float
    truncation_epsilon: float | None
    kernel_nnz: int
    mesh_name: str
    mesh_hash: str

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Pointwise operator action -D^-1 A f."""
        f = np.asarray(f, dtype=np.float64)
        if f.shape[0] != self.n:
            raise LengthMismatch(f"function has {f.shape[0]} values, mesh has {self.n} vertices")
        return -(self.stiffness @ f) / (self.masses if f.ndim == 1 else self.masses[:, None])


def kernel_radius_squared(h: float, truncation_epsilon: float) -> float:
    """Squared distance at which the kernel falls to truncation_epsilon of its peak."""
    return 4.0 * h * np.log(1.0 / truncation_epsilon)


def build_laplace(
    mesh: TriMesh,
    h_factor: float = DEFAULT_H_FACTOR,
    truncation_epsilon: float | None = DEFAULT_TRUNCATION,
) -> LaplaceSystem:
    """Assemble (A, D) for the mesh with h = h_factor * mean_edge_length^2.

    truncation_epsilon=None keeps every vertex pair.

    Raises EmptyKernelRow if some vertex ends up with no kernel neighbour.
    """
    if h_factor <= 0:
        raise ValueError(f"h_factor must be positive, got {h_factor}")
    if truncation_epsilon is not None and not (0.0 < truncation_epsilon < 1.0):
        raise ValueError(f"truncation_epsilon must be in (0, 1), got {truncation_epsilon}")

    masses = vertex_lumped_mass(mesh).masses
    n = mesh.n_vertices
    h = h_factor * mesh.mean_edge_length() ** 2
    x = mesh.vertices

    if truncation_epsilon is None:
        rows, cols = np.triu_indices(n, k=1)
    else:
        radius_sq = kernel_radius_squared(h, truncation_epsilon)
        pairs = cKDTree(x).query_pairs(r=np.sqrt(radius_sq), output_type="ndarray")
        rows, cols = pairs[:, 0], pairs[:, 1]

    d_sq = np.sum((x[rows] - x[cols]) ** 2, axis=1)
    if truncation_epsilon is not None:
        inside = d_sq <= radius_sq
        rows, cols, d_sq = rows[inside], cols[inside], d_sq[inside]

    kernel = np.exp(-d_sq / (4.0 * h)) / (4.0 * np.pi * h * h)
    weights = masses[rows] * masses[cols] * kernel
    nonzero = weights > 0.0
    rows, cols, weights = rows[nonzero], cols[nonzero], weights[nonzero]

    s = sparse.coo_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    ).tocsr()
    q = np.asarray(s.sum(axis=1)).ravel()

    empty = np.flatnonzero(q <= 0.0)
    if empty.size:
        raise EmptyKernelRow(
            f"{mesh.name}: vertex {empty[0]} has an empty kernel row "
            f"({empty.size} such vertices) at h={h:.3e}; raise h_factor above {h_factor}"
        )

    stiffness = (sparse.diags(q) - s).tocsr()
    system = LaplaceSystem(
        stiffness=stiffness,
        mass=sparse.diags(masses),
        masses=masses,
        h=float(h),
        h_factor=float(h_factor),
        truncation_epsilon=truncation_epsilon,
        kernel_nnz=int(s.nnz),
        mesh_name=mesh.name,
        mesh_hash=mesh.content_hash(),
    )
    logger.debug(
        f"{mesh.name}: Laplace n={n}, h={h:.4e}, kernel nnz={s.nnz} "
        f"({s.nnz / float(n * n):.3%} of n^2)"
    )
    return system


def apply_laplace_direct(mesh: TriMesh, h: float, f: np.ndarray, chunk: int = 128) -> np.ndarray:
    """Evaluate the operator by its face double sum, without truncation.

    O(faces * vertices); a reference for the matrix path, not for production use.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (mesh.n_vertices,):
        raise LengthMismatch(f"function has {f.shape} values, mesh has {mesh.n_vertices} vertices")

    x = mesh.vertices
    face_weight = mesh.face_areas / 3.0
    result = np.zeros(mesh.n_vertices)

    for start in range(0, mesh.n_faces, chunk):
        faces = mesh.faces[start : start + chunk]
        weight = face_weight[start : start + chunk]
        for corner in range(3):
            p = faces[:, corner]
            d_sq = np.sum((x[p][:, None, :] - x[None, :, :]) ** 2, axis=2)
            w = weight[:, None] * np.exp(-d_sq / (4.0 * h))
            result += np.sum(w * (f[p][:, None] - f[None, :]), axis=0)

    return result / (4.0 * np.pi * h * h)


def dump_matrix_market(system: LaplaceSystem, directory: Path) -> tuple[Path, Path]:
    """Write A and D as Matrix Market coordinate files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stiffness_path = directory / f"{system.mesh_name}-stiffness.mtx"
    mass_path = directory / f"{system.mesh_name}-mass.mtx"
    scipy.io.mmwrite(str(stiffness_path), system.stiffness, comment=f"h={system.h!r}")
    scipy.io.mmwrite(str(mass_path), sparse.coo_matrix(system.mass))
    return stiffness_path, mass_path
