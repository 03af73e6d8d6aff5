"""Per-shape pre-segmentation: spectral embedding followed by seeded k-means."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from sklearn.cluster import KMeans

from .errors import DisconnectedMesh, KTooLarge, LengthMismatch, ParseError, TooFewPoints
from .mesh import TriMesh
from .spectral import SpectralBasis

logger = logging.getLogger("coseg.preseg")

DEFAULT_K_EMBED = 10
# lambda_2 at or below this fraction of lambda_k counts as a second null mode
NULL_EIGENVALUE_RATIO = 1e-8


@dataclass(frozen=True, eq=False)
class Embedding:
    """Vertex coordinates phi_{j+1} / sqrt(lambda_{j+1}), j = 1..k_embed."""

    coords: np.ndarray

    @property
    def k_embed(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Per-vertex part ids covering [0, n_parts) with no empty part."""

    part_of: np.ndarray
    n_parts: int
    shape: str

    def __post_init__(self) -> None:
        part_of = np.asarray(self.part_of, dtype=np.int64)
        if part_of.ndim != 1:
            raise ValueError("part_of must be a 1-D array")
        if part_of.size and (part_of.min() < 0 or part_of.max() >= self.n_parts):
            raise ValueError(f"{self.shape}: part ids must lie in [0, {self.n_parts})")
        sizes = np.bincount(part_of, minlength=self.n_parts)
        if np.any(sizes == 0):
            raise ValueError(f"{self.shape}: empty parts {np.flatnonzero(sizes == 0).tolist()}")
        part_of.setflags(write=False)
        object.__setattr__(self, "part_of", part_of)

    def part_sizes(self) -> np.ndarray:
        return np.bincount(self.part_of, minlength=self.n_parts)

    def to_dict(self) -> dict[str, object]:
        return {"shape": self.shape, "n_parts": int(self.n_parts), "part_of": self.part_of.tolist()}


def spectral_embedding(basis: SpectralBasis, k_embed: int = DEFAULT_K_EMBED) -> Embedding:
    """Embed vertices with the first k_embed non-trivial eigenpairs.

    Raises DisconnectedMesh when lambda_2 is numerically zero.
    """
    if k_embed < 1:
        raise ValueError(f"k_embed must be positive, got {k_embed}")
    if basis.k < k_embed + 1:
        raise KTooLarge(f"{basis.mesh_name}: embedding of dimension {k_embed} needs {k_embed + 1} eigenpairs, "
                        f"basis has {basis.k}")

    values = basis.eigenvalues
    if values[1] <= NULL_EIGENVALUE_RATIO * values[-1]:
        raise DisconnectedMesh(
            f"{basis.mesh_name}: second eigenvalue {values[1]:.3e} is numerically zero; "
            f"the mesh is disconnected, split it into components first"
        )

    coords = basis.eigenvectors[:, 1 : k_embed + 1] / np.sqrt(values[1 : k_embed + 1])
    return Embedding(coords)


def kmeans(
    points: np.ndarray,
    n_clusters: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-4,
    n_init: int = 10,
) -> np.ndarray:
    """Seeded k-means++ / Lloyd clustering with canonical cluster ids.

    Cluster ids are renumbered in order of first appearance, so equal
    partitions always come back with equal ids.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    m = len(points)
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be positive, got {n_clusters}")
    if n_clusters > m:
        raise TooFewPoints(f"{n_clusters} clusters requested for {m} points")
    if n_clusters == 1:
        return np.zeros(m, dtype=np.int64)

    distinct = len(np.unique(points, axis=0))
    if distinct < n_clusters:
        raise TooFewPoints(f"{n_clusters} clusters requested, only {distinct} distinct points")

    model = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=n_init,
        max_iter=max_iter,
        tol=tol,
        random_state=seed,
    ).fit(points)
    return _renumber(model.labels_)


def pre_segment(
    mesh: TriMesh,
    basis: SpectralBasis,
    n_parts: int,
    k_embed: int = DEFAULT_K_EMBED,
    seed: int = 0,
) -> Segmentation:
    """Cluster the spectral embedding of the mesh into n_parts parts."""
    if basis.n != mesh.n_vertices:
        raise LengthMismatch(f"{mesh.name}: basis has {basis.n} vertices, mesh has {mesh.n_vertices}")
    if n_parts == 1:
        return Segmentation(np.zeros(mesh.n_vertices, dtype=np.int64), 1, mesh.name)

    embedding = spectral_embedding(basis, k_embed)
    part_of = kmeans(embedding.coords, n_parts, seed=seed)
    segmentation = Segmentation(part_of, n_parts, mesh.name)
    logger.info(f"{mesh.name}: pre-segmented into {n_parts} parts, sizes {segmentation.part_sizes().tolist()}")
    return segmentation


def split_disconnected_parts(mesh: TriMesh, segmentation: Segmentation) -> Segmentation:
    """Split every part into its connected components on the mesh graph."""
    edges = mesh.edges
    same_part = segmentation.part_of[edges[:, 0]] == segmentation.part_of[edges[:, 1]]
    inner = edges[same_part]

    n = mesh.n_vertices
    graph = sparse.coo_matrix((np.ones(len(inner)), (inner[:, 0], inner[:, 1])), shape=(n, n))
    n_pieces, piece_of = connected_components(graph, directed=False)
    part_of = _renumber(piece_of)
    if n_pieces != segmentation.n_parts:
        logger.info(f"{mesh.name}: split {segmentation.n_parts} parts into {n_pieces} connected parts")
    return Segmentation(part_of, int(n_pieces), segmentation.shape)


def write_segmentation(path: Path, segmentation: Segmentation) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(segmentation.to_dict()) + "\n")


def read_segmentation(path: Path) -> Segmentation:
    try:
        data = json.loads(Path(path).read_text())
        return Segmentation(np.asarray(data["part_of"], dtype=np.int64), int(data["n_parts"]), str(data["shape"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ParseError(f"Invalid segmentation file {path}: {e}") from e


def _renumber(labels: np.ndarray) -> np.ndarray:
    """Relabel ids in order of first appearance."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(len(order))
    _, inverse = np.unique(labels, return_inverse=True)
    return ranks[inverse]
