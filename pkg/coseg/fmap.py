"""Functional maps between spectral bases, estimated from descriptor constraints."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .descriptors import HksField, normalize_slices
from .errors import BasisMismatch, ConfigMismatch, LengthMismatch, ParseError, SingularSystem
from .spectral import FunctionCoefficients, SpectralBasis, project_many

logger = logging.getLogger("coseg.fmap")

DEFAULT_RIDGE_SCALE = 1e-6
SPARSITY_THRESHOLD = 0.1


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Index-aligned coefficient columns of corresponding descriptor functions."""

    source_coeffs: np.ndarray
    target_coeffs: np.ndarray
    source_basis_id: str
    target_basis_id: str
    kind: str = "hks"
    source_eigenvalues: np.ndarray | None = None
    target_eigenvalues: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.source_coeffs.ndim != 2 or self.target_coeffs.ndim != 2:
            raise ValueError("constraint coefficients must be 2-D")
        if self.source_coeffs.shape[1] != self.target_coeffs.shape[1]:
            raise LengthMismatch(
                f"{self.source_coeffs.shape[1]} source constraints vs {self.target_coeffs.shape[1]} target constraints"
            )

    @property
    def m(self) -> int:
        return self.source_coeffs.shape[1]


@dataclass(frozen=True, eq=False)
class FunctionalMap:
    """Matrix C (k_target x k_source) taking source coefficients to target coefficients."""

    C: np.ndarray
    source_basis_id: str
    target_basis_id: str
    fit_residual: float = 0.0
    ridge: float = 0.0
    commutativity: float = 0.0
    rank: int | None = None

    @property
    def k_source(self) -> int:
        return self.C.shape[1]

    @property
    def k_target(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict[str, object]:
        return {
            "source": self.source_basis_id,
            "target": self.target_basis_id,
            "k_source": self.k_source,
            "k_target": self.k_target,
            "ridge": float(self.ridge),
            "commutativity": float(self.commutativity),
            "rank": self.rank,
            "residual": float(self.fit_residual),
            "C": self.C.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FunctionalMap":
        try:
            C = np.asarray(data["C"], dtype=np.float64)
            if C.shape != (data["k_target"], data["k_source"]):
                raise ValueError(f"C has shape {C.shape}, header says {(data['k_target'], data['k_source'])}")
            return cls(
                C=C,
                source_basis_id=str(data["source"]),
                target_basis_id=str(data["target"]),
                fit_residual=float(data.get("residual", 0.0)),
                ridge=float(data.get("ridge", 0.0)),
                commutativity=float(data.get("commutativity", 0.0)),
                rank=data.get("rank"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Invalid functional map record: {e}") from e


def identity_map(basis: SpectralBasis) -> FunctionalMap:
    """Self-map of a basis."""
    return FunctionalMap(np.eye(basis.k), basis.basis_id, basis.basis_id, rank=basis.k)


def build_hks_constraints(
    source: tuple[SpectralBasis, HksField],
    target: tuple[SpectralBasis, HksField],
    normalize: bool = True,
) -> ConstraintSet:
    """Project the HKS time slices of both shapes onto their bases.

    Column j on both sides comes from time sample j. With normalize each slice
    is first divided by its mass-weighted mean; without it the fields are
    projected as given and must agree on whether they were normalized.
    """
    source_basis, source_hks = source
    target_basis, target_hks = target
    if source_hks.n_times != target_hks.n_times:
        raise ConfigMismatch(f"HKS fields have {source_hks.n_times} and {target_hks.n_times} time samples")
    if not normalize and source_hks.normalized != target_hks.normalized:
        raise ConfigMismatch("one HKS field is slice-normalized and the other is not")

    source_values = source_hks.values
    target_values = target_hks.values
    if normalize:
        source_values = normalize_slices(source_values, source_basis.masses)
        target_values = normalize_slices(target_values, target_basis.masses)
    return ConstraintSet(
        source_coeffs=project_many(source_basis, source_values),
        target_coeffs=project_many(target_basis, target_values),
        source_basis_id=source_basis.basis_id,
        target_basis_id=target_basis.basis_id,
        kind="hks",
        source_eigenvalues=source_basis.eigenvalues,
        target_eigenvalues=target_basis.eigenvalues,
    )


def estimate_map(
    constraints: ConstraintSet,
    ridge: float | None = None,
    commutativity: float = 0.0,
) -> FunctionalMap:
    """Least-squares C minimizing ||C S - T||^2 + ridge ||C||^2.

    ridge=None uses 1e-6 * ||S||_F^2 / m. With commutativity > 0 the objective
    also penalizes C Lambda_s - Lambda_t C (eigenvalue differences normalized to
    unit Frobenius norm and scaled by ||S||_F^2); each row of C is then solved
    on its own.

    Raises SingularSystem if ridge is 0 and S does not have full row rank.
    """
    S = constraints.source_coeffs
    T = constraints.target_coeffs
    k_source, m = S.shape
    if m < 1:
        raise ValueError("at least one constraint is required")
    if commutativity < 0:
        raise ValueError(f"commutativity must be non-negative, got {commutativity}")

    s_norm_sq = float(np.sum(S * S))
    if ridge is None:
        ridge = DEFAULT_RIDGE_SCALE * s_norm_sq / m
    if ridge < 0:
        raise ValueError(f"ridge must be non-negative, got {ridge}")

    rank = int(np.linalg.matrix_rank(S))
    if ridge == 0 and rank < k_source:
        raise SingularSystem(
            f"constraint matrix has rank {rank} < {k_source} basis functions; use ridge > 0",
            rank,
        )

    if commutativity > 0:
        C = _solve_with_commutativity(constraints, ridge, commutativity * s_norm_sq)
    elif ridge == 0:
        C = scipy.linalg.lstsq(S.T, T.T)[0].T
    else:
        gram = S @ S.T + ridge * np.eye(k_source)
        C = scipy.linalg.solve(gram, S @ T.T, assume_a="pos").T

    misfit = np.linalg.norm(C @ S - T)
    t_norm = np.linalg.norm(T)
    residual = float(misfit / t_norm) if t_norm > 0 else float(misfit)

    logger.debug(
        f"map {constraints.source_basis_id} -> {constraints.target_basis_id}: "
        f"rank {rank}/{k_source}, ridge {ridge:.3e}, residual {residual:.3e}"
    )
    return FunctionalMap(
        C=C,
        source_basis_id=constraints.source_basis_id,
        target_basis_id=constraints.target_basis_id,
        fit_residual=residual,
        ridge=float(ridge),
        commutativity=float(commutativity),
        rank=rank,
    )


def push_function(fmap: FunctionalMap, a: FunctionCoefficients) -> FunctionCoefficients:
    """Map source coefficients a to target coefficients C a."""
    if a.basis_id != fmap.source_basis_id:
        raise BasisMismatch(f"coefficients in basis '{a.basis_id}', map expects '{fmap.source_basis_id}'")
    return FunctionCoefficients(fmap.C @ a.coeffs, fmap.target_basis_id)


def sparsity_fraction(fmap: FunctionalMap | np.ndarray, threshold: float = SPARSITY_THRESHOLD) -> float:
    """Fraction of entries of C with magnitude below threshold."""
    C = fmap.C if isinstance(fmap, FunctionalMap) else np.asarray(fmap)
    return float(np.mean(np.abs(C) < threshold))


def diagonal_concentration(fmap: FunctionalMap | np.ndarray) -> float:
    """Share of total |C| mass on the main diagonal."""
    C = np.abs(fmap.C if isinstance(fmap, FunctionalMap) else np.asarray(fmap))
    total = C.sum()
    if total == 0:
        return 0.0
    return float(np.trace(C) / total)


def write_maps_json(path: Path, maps: list[FunctionalMap]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([m.to_dict() for m in maps]) + "\n")


def read_maps_json(path: Path) -> list[FunctionalMap]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid map JSON in {path}: {e}") from e
    if isinstance(data, dict):
        data = [data]
    return [FunctionalMap.from_dict(item) for item in data]


def _solve_with_commutativity(constraints: ConstraintSet, ridge: float, weight: float) -> np.ndarray:
    S = constraints.source_coeffs
    T = constraints.target_coeffs
    k_source = S.shape[0]
    k_target = T.shape[0]
    if constraints.source_eigenvalues is None or constraints.target_eigenvalues is None:
        raise ValueError("commutativity needs the eigenvalues of both bases")

    source_values = constraints.source_eigenvalues[:k_source]
    target_values = constraints.target_eigenvalues[:k_target]
    difference = source_values[None, :] - target_values[:, None]
    difference_norm = np.linalg.norm(difference)
    if difference_norm > 0:
        difference = difference / difference_norm
    penalty = difference**2

    gram = S @ S.T + ridge * np.eye(k_source)
    rhs = T @ S.T
    C = np.empty((k_target, k_source))
    for i in range(k_target):
        system = gram + weight * np.diag(penalty[i])
        C[i] = scipy.linalg.solve(system, rhs[i], assume_a="pos")
    return C
