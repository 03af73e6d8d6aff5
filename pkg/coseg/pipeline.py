"""Co-segmentation of a shape set through functional maps to a reference shape."""

import json
import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .descriptors import HksConfig, HksField, compute_hks
from .errors import CosegError, EmptyPart, EmptySet, MissingMap, TooFewParts, TooFewPoints, ValidationError
from .evaluation import label_accuracy, load_ground_truth, rand_index, set_label_accuracy, write_scores_json
from .fmap import (
    FunctionalMap,
    build_hks_constraints,
    diagonal_concentration,
    estimate_map,
    identity_map,
    push_function,
    sparsity_fraction,
    write_maps_json,
)
from .manifest import RunManifest, write_manifest
from .mesh import (
    TriMesh,
    VertexMassVector,
    default_palette,
    export_labeled_mesh,
    load_mesh,
    write_labels_json,
)
from .preseg import Segmentation, kmeans, pre_segment, split_disconnected_parts, write_segmentation
from .spectral import BasisCache, SpectralBasis, compute_mesh_basis, project

logger = logging.getLogger("coseg.pipeline")

EXPECTED_SPARSITY = 0.9


@dataclass(frozen=True, eq=False)
class PartSignature:
    """Unit-norm image of a part indicator in the reference basis."""

    shape_index: int
    shape_id: str
    part_id: int
    sig: np.ndarray
    part_area: float


@dataclass(frozen=True, eq=False)
class Labeling:
    label_of: np.ndarray
    n_labels: int
    shape_id: str

    def __post_init__(self) -> None:
        label_of = np.asarray(self.label_of, dtype=np.int64)
        if label_of.size and (label_of.min() < 0 or label_of.max() >= self.n_labels):
            raise ValueError(f"{self.shape_id}: labels must lie in [0, {self.n_labels})")
        label_of.setflags(write=False)
        object.__setattr__(self, "label_of", label_of)


@dataclass
class ShapeState:
    """Per-shape intermediate results."""

    mesh: TriMesh
    basis: SpectralBasis
    map_basis: SpectralBasis
    hks: HksField
    segmentation: Segmentation
    truth: np.ndarray | None = None


@dataclass
class CosegResult:
    shape_names: list[str]
    labelings: list[Labeling]
    segmentations: list[Segmentation]
    part_to_label: dict[tuple[int, int], int]
    reference: int
    maps: dict[int, FunctionalMap]
    signatures: list[PartSignature]
    diagnostics: dict[str, object]
    scores: dict[str, object] | None = None
    output_files: list[Path] = field(default_factory=list)


# =============================================================================
# Public API
# =============================================================================


def choose_reference(shapes: Sequence[TriMesh | tuple[TriMesh, SpectralBasis]]) -> int:
    """Index of the shape with the (lower) median vertex count; ties go to the lowest index."""
    if not shapes:
        raise EmptySet("no shapes to choose a reference from")
    counts = [(s[0] if isinstance(s, tuple) else s).n_vertices for s in shapes]
    median = sorted(counts)[(len(counts) - 1) // 2]
    return counts.index(median)


def part_indicator(
    mesh: TriMesh,
    segmentation: Segmentation,
    part_id: int,
    masses: VertexMassVector | np.ndarray,
) -> np.ndarray:
    """Indicator of one part, scaled to unit norm in the mass inner product."""
    masses = masses.masses if isinstance(masses, VertexMassVector) else np.asarray(masses)
    if len(segmentation.part_of) != mesh.n_vertices:
        raise ValueError(f"{mesh.name}: segmentation does not cover the mesh")
    f = (segmentation.part_of == part_id).astype(np.float64)
    if not f.any():
        raise EmptyPart(f"{mesh.name}: part {part_id} has no vertices")
    return f / np.sqrt(masses @ f)


def build_signatures(
    meshes: Sequence[TriMesh],
    bases: Sequence[SpectralBasis],
    segmentations: Sequence[Segmentation],
    maps: Mapping[int, FunctionalMap],
    reference: int,
) -> list[PartSignature]:
    """Map every part indicator into the reference basis and normalize it.

    The reference shape uses the identity map unless one is supplied.
    """
    signatures: list[PartSignature] = []
    for index, (mesh, basis, segmentation) in enumerate(zip(meshes, bases, segmentations)):
        fmap = maps.get(index)
        if fmap is None:
            if index != reference:
                raise MissingMap(f"{mesh.name}: no functional map to the reference shape")
            fmap = identity_map(basis)

        for part_id in range(segmentation.n_parts):
            indicator = part_indicator(mesh, segmentation, part_id, basis.masses)
            mapped = push_function(fmap, project(basis, indicator)).coeffs
            norm = np.linalg.norm(mapped)
            if norm == 0:
                raise CosegError(f"{mesh.name}: part {part_id} maps to the zero function")
            area = float(basis.masses[segmentation.part_of == part_id].sum())
            signatures.append(PartSignature(index, mesh.name, part_id, mapped / norm, area))
    return signatures


def cluster_parts(signatures: Sequence[PartSignature], n_labels: int, seed: int = 0) -> dict[tuple[int, int], int]:
    """k-means over signature vectors; returns (shape index, part id) -> label."""
    if n_labels > len(signatures):
        raise TooFewParts(f"{n_labels} labels requested for {len(signatures)} parts")
    points = np.vstack([s.sig for s in signatures])
    try:
        labels = kmeans(points, n_labels, seed=seed)
    except TooFewPoints as e:
        raise TooFewParts(f"cannot form {n_labels} labels: {e}") from e
    return {(s.shape_index, s.part_id): int(label) for s, label in zip(signatures, labels)}


def label_shapes(
    segmentations: Sequence[Segmentation],
    part_to_label: Mapping[tuple[int, int], int],
    n_labels: int,
) -> list[Labeling]:
    labelings: list[Labeling] = []
    for index, segmentation in enumerate(segmentations):
        table = np.array([part_to_label[(index, p)] for p in range(segmentation.n_parts)], dtype=np.int64)
        labelings.append(Labeling(table[segmentation.part_of], n_labels, segmentation.shape))
    return labelings


def prepare_shape(mesh: TriMesh, config: RunConfig, cache: BasisCache | None = None) -> ShapeState:
    """Eigenbasis, HKS field and pre-segmentation of one shape."""
    try:
        basis = compute_mesh_basis(mesh, config.k_eigs, config.h_factor, config.truncation_epsilon, cache)
        hks = compute_hks(basis, HksConfig(config.n_times, config.k_eigs, config.hks_normalize))
        segmentation = pre_segment(mesh, basis, config.n_parts, config.k_embed, config.seed)
        if config.split_components:
            segmentation = split_disconnected_parts(mesh, segmentation)
    except CosegError as e:
        raise _with_shape(e, mesh.name) from e

    return ShapeState(
        mesh=mesh,
        basis=basis,
        map_basis=basis.truncated(min(config.k_basis, basis.k)),
        hks=hks,
        segmentation=segmentation,
    )


def run_coseg(config: RunConfig, write_outputs: bool = True) -> CosegResult:
    """Pre-segment, map to the reference, cluster part signatures, label and write outputs."""
    if len(config.shapes) < 2:
        raise ValidationError("co-segmentation needs at least 2 shapes")
    logger.info(f"Run: {config.to_log_string()}")

    # Load
    meshes = _load_meshes(config.shapes)
    cache = BasisCache(config.cache_dir) if config.cache_dir is not None else None

    # Per-shape stages
    logger.info(f"Preparing {len(meshes)} shapes with {config.workers} worker(s)")
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            states = list(pool.map(lambda m: prepare_shape(m, config, cache), meshes))
    else:
        states = [prepare_shape(m, config, cache) for m in meshes]

    if config.truth is not None:
        for state, path in zip(states, config.truth):
            state.truth = load_ground_truth(path, state.mesh)

    # Maps to the reference
    reference = choose_reference(meshes)
    ref_state = states[reference]
    logger.info(f"Reference shape: {ref_state.mesh.name} ({ref_state.mesh.n_vertices} vertices)")

    maps: dict[int, FunctionalMap] = {}
    for index, state in enumerate(states):
        if index == reference:
            continue
        try:
            constraints = build_hks_constraints(
                (state.map_basis, state.hks),
                (ref_state.map_basis, ref_state.hks),
                normalize=config.hks_normalize,
            )
            maps[index] = estimate_map(constraints, config.ridge, config.commutativity)
        except CosegError as e:
            raise _with_shape(e, state.mesh.name) from e
        log_map_summary(state.mesh.name, ref_state.mesh.name, maps[index])

    # Signatures, clustering, labels
    segmentations = [s.segmentation for s in states]
    signatures = build_signatures(
        meshes, [s.map_basis for s in states], segmentations, maps, reference
    )
    part_to_label = cluster_parts(signatures, config.n_labels, config.seed)
    labelings = label_shapes(segmentations, part_to_label, config.n_labels)
    logger.info(f"Clustered {len(signatures)} parts into {config.n_labels} labels")

    result = CosegResult(
        shape_names=[m.name for m in meshes],
        labelings=labelings,
        segmentations=segmentations,
        part_to_label=part_to_label,
        reference=reference,
        maps=maps,
        signatures=signatures,
        diagnostics=_diagnostics(states, reference, maps, signatures, part_to_label),
        scores=_scores(states, labelings) if config.truth is not None else None,
    )

    if write_outputs:
        result.output_files = write_results(result, states, config)
    return result


def write_results(result: CosegResult, states: Sequence[ShapeState], config: RunConfig) -> list[Path]:
    """Write labeled PLYs, label and segmentation sidecars, maps, diagnostics and the manifest."""
    output_dir = config.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    palette = default_palette(config.n_labels)
    written: list[Path] = []

    for state, labeling in zip(states, result.labelings):
        name = state.mesh.name
        ply_path = output_dir / f"{name}.ply"
        export_labeled_mesh(state.mesh, labeling.label_of, palette, ply_path)
        labels_path = output_dir / f"{name}.labels.json"
        write_labels_json(labels_path, labeling.label_of)
        segmentation_path = output_dir / f"{name}.segmentation.json"
        write_segmentation(segmentation_path, state.segmentation)
        written += [ply_path, labels_path, segmentation_path]

    maps_path = output_dir / "maps.json"
    write_maps_json(maps_path, [result.maps[i] for i in sorted(result.maps)])
    diagnostics_path = output_dir / "diagnostics.json"
    diagnostics_path.write_text(json.dumps(result.diagnostics, indent=2, sort_keys=True) + "\n")
    written += [maps_path, diagnostics_path]

    if result.scores is not None:
        scores_path = output_dir / "scores.json"
        write_scores_json(scores_path, result.scores)
        written.append(scores_path)

    manifest = RunManifest(
        package_version=__version__,
        config_hash=config.content_hash(),
        meshes={s.mesh.name: s.mesh.content_hash() for s in states},
        reference=result.shape_names[result.reference],
    )
    for path in written:
        manifest.add_artifact(output_dir, path)
    written.append(write_manifest(output_dir, manifest))

    logger.info(f"Wrote {len(written)} files to {output_dir}")
    return written


def log_map_summary(source: str, target: str, fmap: FunctionalMap) -> float:
    """Log fit residual, rank and sparsity of a map; warn when it is unexpectedly dense."""
    sparsity = sparsity_fraction(fmap)
    logger.info(
        f"Map {source} -> {target}: residual {fmap.fit_residual:.3e}, rank {fmap.rank}, "
        f"sparsity {sparsity:.3f}"
    )
    if sparsity < EXPECTED_SPARSITY:
        logger.warning(
            f"Map {source} -> {target} is denser than expected: "
            f"{sparsity:.1%} of entries below 0.1 (expected >= {EXPECTED_SPARSITY:.0%})"
        )
    return sparsity


# =============================================================================
# Private helpers
# =============================================================================


def _load_meshes(paths: Sequence[Path]) -> list[TriMesh]:
    """Load meshes, making names unique when file stems repeat."""
    meshes: list[TriMesh] = []
    seen: set[str] = set()
    for index, path in enumerate(paths):
        mesh = load_mesh(path)
        name = mesh.name
        if name in seen:
            name = f"{name}-{index}"
            mesh = TriMesh(mesh.vertices, mesh.faces, name)
        seen.add(name)
        logger.info(f"Loaded {name}: {mesh.n_vertices} vertices, {mesh.n_faces} faces")
        meshes.append(mesh)
    return meshes


def _with_shape(error: CosegError, name: str) -> CosegError:
    """Prefix the error message with the shape name, keeping the error type."""
    message = str(error)
    if not message.startswith(f"{name}:"):
        error.args = (f"{name}: {message}",) + tuple(error.args[1:])
    return error


def _diagnostics(
    states: Sequence[ShapeState],
    reference: int,
    maps: Mapping[int, FunctionalMap],
    signatures: Sequence[PartSignature],
    part_to_label: Mapping[tuple[int, int], int],
) -> dict[str, object]:
    names = [s.mesh.name for s in states]
    return {
        "reference": names[reference],
        "shapes": [
            {
                "name": s.mesh.name,
                "n_vertices": s.mesh.n_vertices,
                "n_faces": s.mesh.n_faces,
                "k_eigs": s.basis.k,
                "lambda_2": float(s.basis.eigenvalues[1]),
                "max_eigen_residual": float(s.basis.residuals.max()),
                "part_sizes": s.segmentation.part_sizes().tolist(),
            }
            for s in states
        ],
        "maps": [
            {
                "source": names[i],
                "target": names[reference],
                "k_source": maps[i].k_source,
                "k_target": maps[i].k_target,
                "residual": maps[i].fit_residual,
                "rank": maps[i].rank,
                "ridge": maps[i].ridge,
                "sparsity_fraction": sparsity_fraction(maps[i]),
                "diagonal_concentration": diagonal_concentration(maps[i]),
            }
            for i in sorted(maps)
        ],
        "parts": [
            {
                "shape": sig.shape_id,
                "part": sig.part_id,
                "area": sig.part_area,
                "label": part_to_label[(sig.shape_index, sig.part_id)],
            }
            for sig in signatures
        ],
    }


def _scores(states: Sequence[ShapeState], labelings: Sequence[Labeling]) -> dict[str, object]:
    per_shape = []
    for state, labeling in zip(states, labelings):
        per_shape.append(
            {
                "shape": state.mesh.name,
                "accuracy": label_accuracy(labeling, state.truth, state.basis.masses),
                "rand_index": rand_index(labeling, state.truth),
            }
        )
    set_accuracy = set_label_accuracy(
        list(labelings), [s.truth for s in states], [s.basis.masses for s in states]
    )
    logger.info(f"Set accuracy against ground truth: {set_accuracy:.4f}")
    return {"set_accuracy": set_accuracy, "shapes": per_shape}
