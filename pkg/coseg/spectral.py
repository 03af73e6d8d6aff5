"""Mass-orthonormal Laplace eigenbases: eigensolve, projection, reconstruction, caching."""

import json
import logging
import os
import tempfile
import zipfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .errors import BasisMismatch, ConvergenceFailure, KTooLarge, LengthMismatch
from .laplace import DEFAULT_H_FACTOR, DEFAULT_TRUNCATION, LaplaceSystem, build_laplace
from .mesh import TriMesh

logger = logging.getLogger("coseg.spectral")

DENSE_LIMIT = 1500
RESIDUAL_TOL = 1e-8
CLUSTER_GAP = 1e-6
CACHE_VERSION = 1

SolverMethod = Literal["auto", "sparse", "dense"]


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """First k eigenpairs of A phi = lambda D phi, ascending, D-orthonormal."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    masses: np.ndarray
    residuals: np.ndarray
    basis_id: str
    mesh_name: str
    mesh_hash: str
    clusters: tuple[tuple[int, ...], ...] = ()

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    def truncated(self, k: int) -> "SpectralBasis":
        """View of the first k pairs, with its own basis id."""
        if k > self.k:
            raise KTooLarge(f"{self.mesh_name}: basis has {self.k} pairs, {k} requested")
        if k == self.k:
            return self
        return replace(
            self,
            eigenvalues=self.eigenvalues[:k],
            eigenvectors=self.eigenvectors[:, :k],
            residuals=self.residuals[:k],
            basis_id=_basis_id(self.mesh_name, self.mesh_hash, k),
            clusters=tuple(c for c in self.clusters if max(c) < k),
        )


@dataclass(frozen=True, eq=False)
class FunctionCoefficients:
    """Coefficients of a function in one spectral basis."""

    coeffs: np.ndarray
    basis_id: str

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 1 or not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be a finite 1-D vector")
        object.__setattr__(self, "coeffs", coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)


# =============================================================================
# Public API
# =============================================================================


def compute_basis(
    system: LaplaceSystem,
    k: int,
    method: SolverMethod = "auto",
    residual_tol: float = RESIDUAL_TOL,
) -> SpectralBasis:
    """Solve for the k algebraically smallest eigenpairs of (A, D).

    Dense solve for desk-scale meshes, shift-invert Lanczos otherwise; both end
    with a Rayleigh-Ritz step in the D inner product, deterministic sign fixing
    and a residual check.
    """
    n = system.n
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k >= n:
        raise KTooLarge(f"{system.mesh_name}: k={k} eigenpairs requested, mesh has {n} vertices")

    use_dense = method == "dense" or (method == "auto" and (n <= DENSE_LIMIT or k >= n - 1))
    logger.debug(f"{system.mesh_name}: eigensolve k={k}, n={n}, {'dense' if use_dense else 'sparse'}")

    if use_dense:
        values, vectors = _dense_eigenpairs(system, k)
        values, vectors, residuals = _finalize(system, values, vectors)
    else:
        values, vectors = _sparse_eigenpairs(system, k, ncv=None)
        values, vectors, residuals = _finalize(system, values, vectors)
        if not _residuals_ok(residuals, values, residual_tol):
            logger.warning(
                f"{system.mesh_name}: max residual {residuals.max():.2e}, retrying with a larger Krylov space"
            )
            values, vectors = _sparse_eigenpairs(system, k, ncv=min(n, max(4 * k, k + 40)))
            values, vectors, residuals = _finalize(system, values, vectors)

    if not _residuals_ok(residuals, values, residual_tol):
        raise ConvergenceFailure(
            f"{system.mesh_name}: eigenpairs did not reach residual {residual_tol:g} "
            f"(max {residuals.max():.2e})",
            residuals.tolist(),
        )

    clusters = _degenerate_clusters(values)
    if clusters:
        logger.debug(f"{system.mesh_name}: degenerate eigenvalue clusters {list(clusters)}")

    return SpectralBasis(
        eigenvalues=values,
        eigenvectors=vectors,
        masses=system.masses,
        residuals=residuals,
        basis_id=_basis_id(system.mesh_name, system.mesh_hash, k),
        mesh_name=system.mesh_name,
        mesh_hash=system.mesh_hash,
        clusters=clusters,
    )


def project(basis: SpectralBasis, f: np.ndarray) -> FunctionCoefficients:
    """Coefficients a = Phi^T D f."""
    return FunctionCoefficients(project_many(basis, np.asarray(f)[:, None])[:, 0], basis.basis_id)


def project_many(basis: SpectralBasis, functions: np.ndarray) -> np.ndarray:
    """Project the columns of an (n, m) array; returns a (k, m) coefficient matrix."""
    functions = np.asarray(functions, dtype=np.float64)
    if functions.shape[0] != basis.n:
        raise LengthMismatch(
            f"{basis.mesh_name}: function has {functions.shape[0]} values, basis has {basis.n} vertices"
        )
    return basis.eigenvectors.T @ (basis.masses[:, None] * functions)


def reconstruct(basis: SpectralBasis, a: FunctionCoefficients) -> np.ndarray:
    """Per-vertex function Phi a."""
    if a.basis_id != basis.basis_id:
        raise BasisMismatch(f"coefficients in basis '{a.basis_id}' used with basis '{basis.basis_id}'")
    return basis.eigenvectors @ a.coeffs


def compute_mesh_basis(
    mesh: TriMesh,
    k: int,
    h_factor: float = DEFAULT_H_FACTOR,
    truncation_epsilon: float | None = DEFAULT_TRUNCATION,
    cache: "BasisCache | None" = None,
    method: SolverMethod = "auto",
) -> SpectralBasis:
    """Build the Laplace system and eigenbasis of a mesh, going through the cache if given."""
    k = min(k, mesh.n_vertices - 1)
    if cache is not None:
        cached = cache.load(mesh, h_factor, truncation_epsilon, k)
        if cached is not None:
            return cached

    system = build_laplace(mesh, h_factor, truncation_epsilon)
    basis = compute_basis(system, k, method=method)
    if cache is not None:
        cache.save(basis, h_factor, truncation_epsilon)
    return basis


class BasisCache:
    """On-disk eigenbasis store keyed by (mesh hash, h_factor, truncation, k).

    Entries are .npz containers with a versioned JSON header; an entry whose
    header does not match the mesh hash is ignored and recomputed.
    """

    def __init__(self, cache_dir: Path) -> None:
        self.cache_dir = Path(cache_dir)

    def path_for(self, mesh_name: str, mesh_hash: str, h_factor: float,
                 truncation_epsilon: float | None, k: int) -> Path:
        truncation = "none" if truncation_epsilon is None else f"{truncation_epsilon:g}"
        return self.cache_dir / f"{mesh_name}-{mesh_hash[:16]}-h{h_factor:g}-t{truncation}-k{k}.npz"

    def load(self, mesh: TriMesh, h_factor: float, truncation_epsilon: float | None,
             k: int) -> SpectralBasis | None:
        mesh_hash = mesh.content_hash()
        path = self.path_for(mesh.name, mesh_hash, h_factor, truncation_epsilon, k)
        if not path.exists():
            return None

        try:
            with np.load(path, allow_pickle=False) as data:
                header = json.loads(str(data["header"]))
                expected = _cache_header(mesh.name, mesh_hash, h_factor, truncation_epsilon, k)
                if header != expected:
                    logger.warning(f"Cache entry {path.name} does not match the mesh, recomputing")
                    return None
                values = data["eigenvalues"]
                vectors = data["eigenvectors"]
                masses = data["masses"]
                residuals = data["residuals"]
        except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as e:
            logger.warning(f"Unreadable cache entry {path.name}: {e}")
            return None

        logger.info(f"{mesh.name}: eigenbasis loaded from cache")
        return SpectralBasis(
            eigenvalues=values,
            eigenvectors=vectors,
            masses=masses,
            residuals=residuals,
            basis_id=_basis_id(mesh.name, mesh_hash, k),
            mesh_name=mesh.name,
            mesh_hash=mesh_hash,
            clusters=_degenerate_clusters(values),
        )

    def save(self, basis: SpectralBasis, h_factor: float, truncation_epsilon: float | None) -> Path:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        path = self.path_for(basis.mesh_name, basis.mesh_hash, h_factor, truncation_epsilon, basis.k)
        header = _cache_header(basis.mesh_name, basis.mesh_hash, h_factor, truncation_epsilon, basis.k)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.stem}-", suffix=".tmp", dir=self.cache_dir)
        try:
            with os.fdopen(fd, "wb") as f:
                np.savez(
                    f,
                    header=np.array(json.dumps(header, sort_keys=True)),
                    eigenvalues=basis.eigenvalues,
                    eigenvectors=basis.eigenvectors,
                    masses=basis.masses,
                    residuals=basis.residuals,
                )
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
        logger.debug(f"Cached eigenbasis: {path}")
        return path


# =============================================================================
# Private helpers
# =============================================================================


def _basis_id(mesh_name: str, mesh_hash: str, k: int) -> str:
    return f"{mesh_name}@{mesh_hash[:12]}:k{k}"


def _cache_header(mesh_name: str, mesh_hash: str, h_factor: float,
                  truncation_epsilon: float | None, k: int) -> dict[str, object]:
    return {
        "version": CACHE_VERSION,
        "mesh_name": mesh_name,
        "mesh_hash": mesh_hash,
        "h_factor": float(h_factor),
        "truncation_epsilon": None if truncation_epsilon is None else float(truncation_epsilon),
        "k": int(k),
    }


def _dense_eigenpairs(system: LaplaceSystem, k: int) -> tuple[np.ndarray, np.ndarray]:
    # D is diagonal: reduce to the standard problem D^-1/2 A D^-1/2
    scale = 1.0 / np.sqrt(system.masses)
    reduced = system.stiffness.toarray() * scale[:, None] * scale[None, :]
    reduced = 0.5 * (reduced + reduced.T)
    values, vectors = scipy.linalg.eigh(reduced, subset_by_index=[0, k - 1])
    return values, vectors * scale[:, None]


def _sparse_eigenpairs(system: LaplaceSystem, k: int, ncv: int | None) -> tuple[np.ndarray, np.ndarray]:
    rates = system.stiffness.diagonal() / system.masses
    # A is singular; shift just below zero so A - sigma D is positive definite
    sigma = -1e-6 * float(rates.max())
    v0 = np.random.default_rng(0).standard_normal(system.n)
    try:
        values, vectors = eigsh(
            system.stiffness.tocsc(),
            k=k,
            M=system.mass.tocsc(),
            sigma=sigma,
            which="LM",
            v0=v0,
            ncv=ncv,
            tol=0,
        )
    except (ArpackNoConvergence, ArpackError) as e:
        raise ConvergenceFailure(f"{system.mesh_name}: Lanczos iteration failed: {e}") from e
    return values, vectors


def _finalize(system: LaplaceSystem, values: np.ndarray,
              vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rayleigh-Ritz in the D inner product, clip round-off negatives, fix signs."""
    a = system.stiffness
    m = system.masses
    gram = vectors.T @ (m[:, None] * vectors)
    projected = vectors.T @ (a @ vectors)
    values, rotation = scipy.linalg.eigh(0.5 * (projected + projected.T), 0.5 * (gram + gram.T))
    vectors = vectors @ rotation

    scale = max(float(np.abs(values).max()), 1.0)
    if values.min() < -1e-6 * scale:
        raise ConvergenceFailure(
            f"{system.mesh_name}: negative eigenvalue {values.min():.3e} from a PSD stiffness matrix",
            [],
        )
    values = np.maximum(values, 0.0)

    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs

    weighted = m[:, None] * vectors
    residual_vectors = a @ vectors - weighted * values
    residuals = np.linalg.norm(residual_vectors, axis=0) / np.linalg.norm(weighted, axis=0)
    return values, vectors, residuals


def _residuals_ok(residuals: np.ndarray, values: np.ndarray, tol: float) -> bool:
    return bool(np.all(residuals <= tol * max(1.0, float(values.max()))))


def _degenerate_clusters(values: np.ndarray) -> tuple[tuple[int, ...], ...]:
    """Index groups whose consecutive relative gaps are below CLUSTER_GAP."""
    clusters: list[tuple[int, ...]] = []
    current = [0]
    for i in range(1, len(values)):
        scale = max(abs(values[i]), abs(values[i - 1]))
        if scale > 0 and (values[i] - values[i - 1]) < CLUSTER_GAP * scale:
            current.append(i)
        else:
            if len(current) > 1:
                clusters.append(tuple(current))
            current = [i]
    if len(current) > 1:
        clusters.append(tuple(current))
    return tuple(clusters)
