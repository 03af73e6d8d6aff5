"""Tests for coseg/preseg.py - Spectral embedding and k-means pre-segmentation.

This module tests:
- spectral_embedding columns, Fiedler split and disconnected meshes
- kmeans on blobs, against a brute-force optimum, and its error cases
- pre_segment on dumbbells: purity, determinism, scale invariance
- split_disconnected_parts
- Segmentation validation and JSON round trip
"""

import functools
import itertools
from pathlib import Path

import numpy as np
import pytest

from coseg.errors import DisconnectedMesh, KTooLarge, LengthMismatch, ParseError, TooFewPoints
from coseg.preseg import (
    Segmentation,
    kmeans,
    pre_segment,
    read_segmentation,
    spectral_embedding,
    split_disconnected_parts,
    write_segmentation,
)
from coseg.spectral import SpectralBasis, compute_mesh_basis
from coseg.synthetic import DumbbellSpec, disjoint_union, dumbbell, grid, random_rotation, rigid_motion, scaled


def _wcss(points: np.ndarray, labels: np.ndarray) -> float:
    return float(sum(((points[labels == c] - points[labels == c].mean(axis=0)) ** 2).sum() for c in np.unique(labels)))


@functools.cache
def _all_assignments(m: int, n_clusters: int) -> np.ndarray:
    """Every assignment of m points, the first pinned to cluster 0."""
    rest = np.array(list(itertools.product(range(n_clusters), repeat=m - 1)), dtype=np.int8)
    return np.hstack([np.zeros((len(rest), 1), dtype=np.int8), rest])


def _brute_force_wcss(points: np.ndarray, n_clusters: int) -> float:
    """Smallest WCSS over every assignment."""
    assignments = _all_assignments(len(points), n_clusters)
    sq = (points**2).sum(axis=1)
    total = np.zeros(len(assignments))
    for c in range(n_clusters):
        mask = (assignments == c).astype(np.float64)
        count = mask.sum(axis=1)
        sums = mask @ points
        with np.errstate(divide="ignore", invalid="ignore"):
            spread = mask @ sq - np.where(count > 0, (sums**2).sum(axis=1) / count, 0.0)
        total += np.where(count > 0, spread, 0.0)
    return float(total.min())


class TestSpectralEmbedding:
    """Tests for spectral_embedding."""

    def test_columns_skip_trivial_pair(self, barbell_basis: SpectralBasis) -> None:
        """Column j is phi_{j+1} / sqrt(lambda_{j+1})."""
        embedding = spectral_embedding(barbell_basis, 4)

        expected = barbell_basis.eigenvectors[:, 1:5] / np.sqrt(barbell_basis.eigenvalues[1:5])
        np.testing.assert_allclose(embedding.coords, expected)
        assert embedding.k_embed == 4

    def test_column_norms(self, barbell_basis: SpectralBasis) -> None:
        """D-weighted norm of column j is 1/sqrt(lambda_{j+1})."""
        coords = spectral_embedding(barbell_basis, 5).coords
        norms = np.sqrt((barbell_basis.masses[:, None] * coords**2).sum(axis=0))

        np.testing.assert_allclose(norms, 1.0 / np.sqrt(barbell_basis.eigenvalues[1:6]), rtol=1e-6)

    def test_fiedler_sign_separates_symmetric_dumbbell(self) -> None:
        """On a mirror-symmetric dumbbell the first coordinate's sign splits the lobes."""
        spec = DumbbellSpec(first_radius=0.8, second_radius=0.8)
        mesh, lobes = dumbbell(spec, name="symmetric")
        basis = compute_mesh_basis(mesh, 10)
        split_z = np.sqrt(0.8**2 - spec.neck_radius**2) + spec.neck_length / 2

        sign = np.sign(spectral_embedding(basis, 1).coords[:, 0])
        away = np.abs(mesh.vertices[:, 2] - split_z) > 0.2

        assert len(set(sign[away & (lobes == 0)])) == 1
        assert len(set(sign[away & (lobes == 1)])) == 1
        assert sign[away & (lobes == 0)][0] != sign[away & (lobes == 1)][0]

    def test_disconnected_mesh(self, tet) -> None:
        """Two components beyond the kernel radius make lambda_2 zero."""
        union = disjoint_union(tet, rigid_motion(tet, translation=np.array([100.0, 0.0, 0.0])))
        basis = compute_mesh_basis(union, 6)

        with pytest.raises(DisconnectedMesh, match="disconnected"):
            spectral_embedding(basis, 2)

    def test_basis_too_small(self, barbell_basis: SpectralBasis) -> None:
        with pytest.raises(KTooLarge):
            spectral_embedding(barbell_basis.truncated(5), 5)


class TestKMeans:
    """Tests for kmeans."""

    def test_single_cluster(self) -> None:
        points = np.random.default_rng(0).standard_normal((20, 3))

        np.testing.assert_array_equal(kmeans(points, 1), 0)

    def test_separated_blobs(self) -> None:
        """Blobs 100x their spread apart are recovered exactly."""
        rng = np.random.default_rng(1)
        first = rng.normal(0.0, 1.0, size=(40, 2))
        second = rng.normal(100.0, 1.0, size=(40, 2))

        labels = kmeans(np.vstack([first, second]), 2, seed=3)

        np.testing.assert_array_equal(labels, [0] * 40 + [1] * 40)

    @pytest.mark.parametrize("instance", range(50))
    def test_near_brute_force_optimum(self, instance: int) -> None:
        """12 points into 3 clusters: WCSS within 5% of the exhaustive optimum."""
        points = np.random.default_rng(instance).uniform(0.0, 10.0, size=(12, 2))

        labels = kmeans(points, 3, seed=0)

        assert len(np.unique(labels)) == 3
        assert _wcss(points, labels) <= 1.05 * _brute_force_wcss(points, 3)

    def test_ids_in_order_of_appearance(self) -> None:
        """Cluster ids are canonical: the first point is always in cluster 0."""
        points = np.array([[10.0], [10.1], [0.0], [0.1], [5.0], [5.1]])

        np.testing.assert_array_equal(kmeans(points, 3), [0, 0, 1, 1, 2, 2])

    def test_too_many_clusters(self) -> None:
        with pytest.raises(TooFewPoints):
            kmeans(np.zeros((3, 2)), 4)

    def test_too_few_distinct_points(self) -> None:
        """Duplicates do not count as separate points."""
        with pytest.raises(TooFewPoints, match="distinct"):
            kmeans(np.ones((5, 2)), 2)

    def test_seed_determinism(self) -> None:
        points = np.random.default_rng(9).standard_normal((200, 4))

        np.testing.assert_array_equal(kmeans(points, 5, seed=2), kmeans(points, 5, seed=2))


class TestPreSegment:
    """Tests for pre_segment."""

    def test_single_part(self, barbell, barbell_basis: SpectralBasis) -> None:
        mesh, _ = barbell

        segmentation = pre_segment(mesh, barbell_basis, 1)

        assert segmentation.n_parts == 1
        np.testing.assert_array_equal(segmentation.part_of, 0)

    def test_dumbbell_lobes(self, barbell, barbell_basis: SpectralBasis) -> None:
        """Two parts, each lobe at least 95% pure by area."""
        mesh, lobes = barbell
        part_of = pre_segment(mesh, barbell_basis, 2, k_embed=5).part_of
        masses = barbell_basis.masses

        majority = []
        for lobe in (0, 1):
            in_lobe = lobes == lobe
            shares = np.bincount(part_of[in_lobe], weights=masses[in_lobe], minlength=2)
            majority.append(int(np.argmax(shares)))
            assert shares.max() / shares.sum() >= 0.95
        assert majority[0] != majority[1]

    def test_deterministic(self, barbell, barbell_basis: SpectralBasis) -> None:
        """Same inputs and seed give the same segmentation."""
        mesh, _ = barbell

        first = pre_segment(mesh, barbell_basis, 3, seed=4)
        second = pre_segment(mesh, barbell_basis, 3, seed=4)

        np.testing.assert_array_equal(first.part_of, second.part_of)

    def test_scale_invariant(self, barbell, barbell_basis: SpectralBasis) -> None:
        """Uniform scaling leaves the assignment unchanged."""
        mesh, _ = barbell
        big = scaled(mesh, 2.0)

        original = pre_segment(mesh, barbell_basis, 2)
        enlarged = pre_segment(big, compute_mesh_basis(big, 60), 2)

        np.testing.assert_array_equal(enlarged.part_of, original.part_of)

    def test_rigid_invariant(self, barbell, barbell_basis: SpectralBasis) -> None:
        """Rotation leaves the lobe partition unchanged up to eigenvector ties."""
        mesh, _ = barbell
        moved = rigid_motion(mesh, random_rotation(2), np.array([1.0, 1.0, 1.0]))

        original = pre_segment(mesh, barbell_basis, 2, k_embed=5)
        rotated = pre_segment(moved, compute_mesh_basis(moved, 60), 2, k_embed=5)

        assert np.mean(rotated.part_of == original.part_of) >= 0.99

    def test_basis_of_other_mesh(self, tet, barbell_basis: SpectralBasis) -> None:
        with pytest.raises(LengthMismatch):
            pre_segment(tet, barbell_basis, 2)


class TestSplitDisconnectedParts:
    def test_splits_part_into_components(self) -> None:
        """A part in two separate strips becomes two parts."""
        mesh = grid(6, 2)
        column = np.arange(mesh.n_vertices) // 2
        part_of = np.where(np.isin(column, [2, 3]), 1, 0)

        result = split_disconnected_parts(mesh, Segmentation(part_of, 2, "strip"))

        assert result.n_parts == 3
        np.testing.assert_array_equal(result.part_of, [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2])

    def test_connected_parts_unchanged(self, barbell, barbell_basis: SpectralBasis) -> None:
        mesh, _ = barbell
        segmentation = pre_segment(mesh, barbell_basis, 2)

        result = split_disconnected_parts(mesh, segmentation)

        assert result.n_parts == 2


class TestSegmentation:
    """Tests for the Segmentation type and its JSON form."""

    def test_rejects_empty_part(self) -> None:
        with pytest.raises(ValueError, match="empty parts"):
            Segmentation(np.array([0, 0, 2]), 3, "s")

    def test_rejects_out_of_range(self) -> None:
        with pytest.raises(ValueError, match="part ids"):
            Segmentation(np.array([0, 1, 3]), 3, "s")

    def test_json_round_trip(self, tmp_path: Path) -> None:
        path = tmp_path / "seg.json"
        segmentation = Segmentation(np.array([0, 1, 1, 0]), 2, "shape")

        write_segmentation(path, segmentation)
        loaded = read_segmentation(path)

        np.testing.assert_array_equal(loaded.part_of, segmentation.part_of)
        assert loaded.shape == "shape"
        assert loaded.to_dict() == {"shape": "shape", "n_parts": 2, "part_of": [0, 1, 1, 0]}

    def test_invalid_file(self, tmp_path: Path) -> None:
        path = tmp_path / "seg.json"
        path.write_text('{"shape": "s"}')

        with pytest.raises(ParseError):
            read_segmentation(path)
