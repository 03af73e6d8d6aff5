"""Heat Kernel Signature fields on log-spaced diffusion times."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DisconnectedMesh
from .spectral import SpectralBasis

logger = logging.getLogger("coseg.descriptors")

# t_min is tied to this eigenvalue index (1-based), or the last one available
T_MIN_INDEX = 300
TIME_SCALE = 4.0 * np.log(10.0)


@dataclass(frozen=True)
class HksConfig:
    n_times: int = 100
    k_eigs: int = 300
    normalize: bool = False

    def __post_init__(self) -> None:
        if self.n_times < 2:
            raise ValueError(f"n_times must be at least 2, got {self.n_times}")
        if self.k_eigs < 1:
            raise ValueError(f"k_eigs must be positive, got {self.k_eigs}")


@dataclass(frozen=True, eq=False)
class HksField:
    """values[x, j] = HKS(x, times[j])."""

    values: np.ndarray
    times: np.ndarray
    k_eigs_used: int
    normalized: bool = False

    @property
    def n_times(self) -> int:
        return len(self.times)

    def slice(self, j: int) -> np.ndarray:
        return self.values[:, j]


def hks_times(basis: SpectralBasis, config: HksConfig = HksConfig()) -> np.ndarray:
    """n_times log-uniform samples on [4 ln10 / lambda_300, 4 ln10 / lambda_2].

    lambda_300 falls back to the largest eigenvalue in the basis when it
    holds fewer pairs.
    """
    values = basis.eigenvalues
    if basis.k < 3:
        raise ValueError(f"{basis.mesh_name}: HKS time range needs at least 3 eigenpairs, basis has {basis.k}")
    if values[1] <= 1e-8 * values[-1]:
        raise DisconnectedMesh(
            f"{basis.mesh_name}: second eigenvalue {values[1]:.3e} is numerically zero; "
            f"HKS times are undefined on a disconnected mesh"
        )

    lambda_high = values[min(T_MIN_INDEX, basis.k) - 1]
    t_min = TIME_SCALE / lambda_high
    t_max = TIME_SCALE / values[1]
    times = np.geomspace(t_min, t_max, config.n_times)
    # pin the endpoints exactly
    times[0], times[-1] = t_min, t_max
    return times


def compute_hks(basis: SpectralBasis, config: HksConfig = HksConfig()) -> HksField:
    """HKS(x, t) = sum_i exp(-lambda_i t) phi_i(x)^2 over the first k_eigs pairs.

    With config.normalize each time slice is divided by its mass-weighted mean.
    """
    times = hks_times(basis, config)
    k = min(config.k_eigs, basis.k)
    values = hks_at(basis, times, k)

    if config.normalize:
        values = normalize_slices(values, basis.masses)

    logger.debug(
        f"{basis.mesh_name}: HKS with {k} eigenpairs, {config.n_times} times "
        f"in [{times[0]:.4e}, {times[-1]:.4e}]"
    )
    return HksField(values=values, times=times, k_eigs_used=k, normalized=config.normalize)


def hks_at(basis: SpectralBasis, times: np.ndarray, k_eigs: int | None = None) -> np.ndarray:
    """Heat kernel diagonal at arbitrary times, shape (n_vertices, len(times))."""
    k = basis.k if k_eigs is None else min(k_eigs, basis.k)
    phi = basis.eigenvectors[:, :k]
    decay = np.exp(-np.outer(basis.eigenvalues[:k], np.asarray(times, dtype=np.float64)))
    return (phi * phi) @ decay


def normalize_slices(values: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Divide every column by its mass-weighted mean."""
    means = (masses @ values) / masses.sum()
    return values / means


def dump_hks(path: Path, field: HksField) -> None:
    """Write the field as CSV (one row per vertex) or JSON, chosen by suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".csv":
        header = "vertex," + ",".join(f"{t:.10g}" for t in field.times)
        table = np.column_stack([np.arange(len(field.values)), field.values])
        fmt = ["%d"] + ["%.17g"] * field.n_times
        np.savetxt(path, table, fmt=fmt, delimiter=",", header=header, comments="")
    else:
        payload = {
            "times": field.times.tolist(),
            "k_eigs_used": field.k_eigs_used,
            "normalized": field.normalized,
            "values": field.values.tolist(),
        }
        path.write_text(json.dumps(payload) + "\n")
