"""Tests for coseg/pipeline.py - Co-segmentation of shape sets.

This module tests:
- choose_reference median rule and tie-breaking
- part_indicator normalization and reconstruction on a dumbbell
- build_signatures with identity and duplicate-shape maps
- cluster_parts and label_shapes
- run_coseg end to end on the synthetic dumbbell set, serial and threaded
- The dense-map warning
"""

import json
import logging
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from coseg.config import parse_config
from coseg.errors import EmptyPart, EmptySet, MissingMap, TooFewParts, ValidationError
from coseg.fmap import FunctionalMap, identity_map
from coseg.manifest import read_manifest
from coseg.mesh import TriMesh, read_labels_json
from coseg.pipeline import (
    Labeling,
    PartSignature,
    build_signatures,
    choose_reference,
    cluster_parts,
    label_shapes,
    log_map_summary,
    part_indicator,
    run_coseg,
)
from coseg.preseg import Segmentation
from coseg.spectral import SpectralBasis, project, reconstruct

OUTPUT_FILES = ("maps.json", "diagnostics.json", "scores.json", "manifest.json")


def _shape(n_vertices: int) -> SimpleNamespace:
    return SimpleNamespace(n_vertices=n_vertices)


def _signature(index: int, part: int, vector: list[float]) -> PartSignature:
    sig = np.asarray(vector, dtype=np.float64)
    return PartSignature(index, f"shape-{index}", part, sig / np.linalg.norm(sig), 1.0)


@pytest.fixture(scope="module")
def lobe_segmentation(barbell) -> Segmentation:
    mesh, lobes = barbell
    return Segmentation(lobes, 2, mesh.name)


@pytest.fixture(scope="module")
def demo_run(demo_dir: Path, tmp_path_factory: pytest.TempPathFactory):
    """One co-segmentation run of the demo set and its config."""
    config = replace(parse_config(demo_dir / "demo.json"), output_dir=tmp_path_factory.mktemp("run"))
    return config, run_coseg(config)


class TestChooseReference:
    """Tests for choose_reference."""

    def test_median(self) -> None:
        assert choose_reference([_shape(100), _shape(500), _shape(300)]) == 2

    def test_even_count_takes_lower_median(self) -> None:
        assert choose_reference([_shape(40), _shape(10), _shape(30), _shape(20)]) == 3

    def test_tie_goes_to_first(self) -> None:
        assert choose_reference([_shape(200), _shape(200), _shape(200)]) == 0

    def test_single_shape(self, tet: TriMesh) -> None:
        assert choose_reference([tet]) == 0

    def test_accepts_mesh_basis_pairs(self, tet: TriMesh, sphere: TriMesh) -> None:
        assert choose_reference([(sphere, None), (tet, None)]) == 1

    def test_empty(self) -> None:
        with pytest.raises(EmptySet):
            choose_reference([])


class TestPartIndicator:
    """Tests for part_indicator."""

    def test_whole_mesh_has_unit_norm(self, barbell, barbell_basis: SpectralBasis) -> None:
        mesh, _ = barbell
        whole = Segmentation(np.zeros(mesh.n_vertices, dtype=np.int64), 1, mesh.name)

        f = part_indicator(mesh, whole, 0, barbell_basis.masses)

        assert barbell_basis.masses @ (f * f) == pytest.approx(1.0)

    def test_parts_are_orthogonal(self, barbell, barbell_basis, lobe_segmentation) -> None:
        mesh, _ = barbell
        f0 = part_indicator(mesh, lobe_segmentation, 0, barbell_basis.masses)
        f1 = part_indicator(mesh, lobe_segmentation, 1, barbell_basis.masses)

        assert barbell_basis.masses @ (f0 * f1) == 0.0
        assert barbell_basis.masses @ (f0 * f0) == pytest.approx(1.0)

    def test_reconstruction_stays_on_lobe(self, barbell, barbell_basis, lobe_segmentation) -> None:
        """The band-limited lobe indicator keeps most of its mass on that lobe."""
        mesh, lobes = barbell
        masses = barbell_basis.masses
        f = part_indicator(mesh, lobe_segmentation, 0, masses)

        smooth = reconstruct(barbell_basis, project(barbell_basis, f))
        energy = masses * smooth**2

        assert energy[lobes == 0].sum() >= 0.8 * energy.sum()

    def test_empty_part(self, tet: TriMesh) -> None:
        segmentation = Segmentation(np.zeros(4, dtype=np.int64), 1, tet.name)

        with pytest.raises(EmptyPart):
            part_indicator(tet, segmentation, 1, np.ones(4))


class TestBuildSignatures:
    """Tests for build_signatures."""

    def test_reference_uses_identity(self, barbell, barbell_basis, lobe_segmentation) -> None:
        mesh, _ = barbell
        signatures = build_signatures([mesh], [barbell_basis], [lobe_segmentation], {}, reference=0)

        f = part_indicator(mesh, lobe_segmentation, 1, barbell_basis.masses)
        coeffs = project(barbell_basis, f).coeffs

        assert len(signatures) == 2
        np.testing.assert_allclose(signatures[1].sig, coeffs / np.linalg.norm(coeffs))
        assert np.linalg.norm(signatures[0].sig) == pytest.approx(1.0)

    def test_duplicate_shape_matches(self, barbell, barbell_basis, lobe_segmentation) -> None:
        """An exact copy mapped by the identity gives the same signatures."""
        mesh, _ = barbell
        signatures = build_signatures(
            [mesh, mesh],
            [barbell_basis, barbell_basis],
            [lobe_segmentation, lobe_segmentation],
            {1: identity_map(barbell_basis)},
            reference=0,
        )

        for part in range(2):
            assert signatures[part].sig @ signatures[2 + part].sig >= 0.99

    def test_lobes_differ(self, barbell, barbell_basis, lobe_segmentation) -> None:
        mesh, _ = barbell
        first, second = build_signatures([mesh], [barbell_basis], [lobe_segmentation], {}, reference=0)

        assert first.sig @ second.sig < 0.9

    def test_part_area(self, barbell, barbell_basis, lobe_segmentation) -> None:
        mesh, lobes = barbell
        signatures = build_signatures([mesh], [barbell_basis], [lobe_segmentation], {}, reference=0)

        assert signatures[0].part_area == pytest.approx(barbell_basis.masses[lobes == 0].sum())

    def test_missing_map(self, barbell, barbell_basis, lobe_segmentation) -> None:
        mesh, _ = barbell

        with pytest.raises(MissingMap):
            build_signatures(
                [mesh, mesh], [barbell_basis, barbell_basis], [lobe_segmentation] * 2, {}, reference=0
            )


class TestClusterParts:
    """Tests for cluster_parts and label_shapes."""

    SIGNATURES = [
        _signature(0, 0, [1.0, 0.0, 0.1]),
        _signature(0, 1, [0.0, 1.0, 0.1]),
        _signature(1, 0, [1.0, 0.1, 0.0]),
        _signature(1, 1, [0.1, 1.0, 0.0]),
    ]

    def test_single_label(self) -> None:
        assert set(cluster_parts(self.SIGNATURES, 1).values()) == {0}

    def test_one_label_per_part(self) -> None:
        labels = cluster_parts(self.SIGNATURES, 4)

        assert sorted(labels.values()) == [0, 1, 2, 3]

    def test_groups_similar_parts(self) -> None:
        labels = cluster_parts(self.SIGNATURES, 2)

        assert labels[(0, 0)] == labels[(1, 0)]
        assert labels[(0, 1)] == labels[(1, 1)]
        assert labels[(0, 0)] != labels[(0, 1)]

    def test_too_few_parts(self) -> None:
        with pytest.raises(TooFewParts):
            cluster_parts(self.SIGNATURES, 5)

    def test_label_shapes(self) -> None:
        segmentations = [
            Segmentation(np.array([0, 0, 1]), 2, "a"),
            Segmentation(np.array([1, 0]), 2, "b"),
        ]
        part_to_label = {(0, 0): 2, (0, 1): 0, (1, 0): 2, (1, 1): 1}

        labelings = label_shapes(segmentations, part_to_label, 3)

        np.testing.assert_array_equal(labelings[0].label_of, [2, 2, 0])
        np.testing.assert_array_equal(labelings[1].label_of, [1, 2])
        assert labelings[1].shape_id == "b"

    def test_labeling_range(self) -> None:
        with pytest.raises(ValueError, match="labels must lie"):
            Labeling(np.array([0, 3]), 3, "a")


class TestRunCoseg:
    """End-to-end runs on the synthetic dumbbell set."""

    def test_recovers_lobes(self, demo_run) -> None:
        _, result = demo_run

        assert result.scores is not None
        assert result.scores["set_accuracy"] >= 0.9
        assert len(result.labelings) == 4

    def test_reference_is_median(self, demo_run) -> None:
        _, result = demo_run
        counts = [len(labeling.label_of) for labeling in result.labelings]

        assert counts[result.reference] == sorted(counts)[1]
        assert result.reference not in result.maps
        assert len(result.maps) == 3

    def test_outputs(self, demo_run) -> None:
        config, result = demo_run
        output_dir = config.output_dir

        for name in OUTPUT_FILES:
            assert (output_dir / name).is_file()
        for index, shape in enumerate(result.shape_names):
            assert (output_dir / f"{shape}.ply").is_file()
            labels = read_labels_json(output_dir / f"{shape}.labels.json")
            np.testing.assert_array_equal(labels, result.labelings[index].label_of)

    def test_manifest_lists_artifacts(self, demo_run) -> None:
        config, result = demo_run

        manifest = read_manifest(config.output_dir)

        assert manifest.config_hash == config.content_hash()
        assert manifest.reference == result.shape_names[result.reference]
        assert "maps.json" in manifest.artifacts
        assert set(manifest.meshes) == set(result.shape_names)

    def test_diagnostics(self, demo_run) -> None:
        config, _ = demo_run
        diagnostics = json.loads((config.output_dir / "diagnostics.json").read_text())

        assert len(diagnostics["shapes"]) == 4
        assert len(diagnostics["maps"]) == 3
        assert all(0.0 <= m["sparsity_fraction"] <= 1.0 for m in diagnostics["maps"])

    def test_rerun_is_byte_identical(self, demo_run, tmp_path: Path) -> None:
        config, result = demo_run
        rerun = replace(config, output_dir=tmp_path / "rerun")

        run_coseg(rerun)

        for name in OUTPUT_FILES + tuple(f"{s}.labels.json" for s in result.shape_names):
            assert (rerun.output_dir / name).read_bytes() == (config.output_dir / name).read_bytes()

    def test_identical_meshes_get_identical_labels(self, demo_dir: Path, tmp_path: Path) -> None:
        config = replace(
            parse_config(demo_dir / "demo.json"),
            shapes=(demo_dir / "dumbbell-0.off",) * 2,
            truth=None,
            output_dir=tmp_path,
        )

        result = run_coseg(config, write_outputs=False)

        assert result.shape_names == ["dumbbell-0", "dumbbell-0-1"]
        np.testing.assert_array_equal(result.labelings[0].label_of, result.labelings[1].label_of)
        assert result.output_files == []

    def test_single_shape_rejected(self, demo_dir: Path) -> None:
        config = replace(parse_config(demo_dir / "demo.json"), shapes=(demo_dir / "dumbbell-0.off",), truth=None)

        with pytest.raises(ValidationError, match="at least 2 shapes"):
            run_coseg(config)

    def test_workers_match_serial_run(self, demo_run) -> None:
        """Preparing shapes on a thread pool gives the same maps and labels."""
        config, result = demo_run

        threaded = run_coseg(replace(config, workers=4), write_outputs=False)

        assert threaded.reference == result.reference
        for serial_labeling, threaded_labeling in zip(result.labelings, threaded.labelings):
            np.testing.assert_array_equal(threaded_labeling.label_of, serial_labeling.label_of)
        assert threaded.maps.keys() == result.maps.keys()
        for index, fmap in result.maps.items():
            np.testing.assert_array_equal(threaded.maps[index].C, fmap.C)

    def test_hks_normalize_reaches_the_maps(self, demo_run) -> None:
        """Raw HKS constraints fit different maps than normalized ones."""
        config, result = demo_run

        raw = run_coseg(replace(config, hks_normalize=False), write_outputs=False)

        assert any(not np.allclose(raw.maps[i].C, fmap.C, atol=1e-6) for i, fmap in result.maps.items())


class TestMapLogging:
    """Tests for the per-map log lines."""

    def test_dense_map_warns(self, caplog: pytest.LogCaptureFixture) -> None:
        fmap = FunctionalMap(np.full((10, 10), 0.5), "a@0:k10", "b@0:k10")

        with caplog.at_level(logging.INFO, logger="coseg.pipeline"):
            log_map_summary("a", "b", fmap)

        warnings = [r for r in caplog.records if r.levelno == logging.WARNING]
        assert len(warnings) == 1
        assert "denser than expected" in warnings[0].getMessage()

    def test_sparse_map_is_quiet(self, caplog: pytest.LogCaptureFixture) -> None:
        fmap = FunctionalMap(np.eye(10), "a@0:k10", "b@0:k10")

        with caplog.at_level(logging.INFO, logger="coseg.pipeline"):
            log_map_summary("a", "b", fmap)

        assert "sparsity 0.900" in caplog.text
        assert not [r for r in caplog.records if r.levelno == logging.WARNING]
