"""Scoring labelings against ground truth."""

import json
import logging
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import rand_score

from .errors import CountMismatch, LengthMismatch, ParseError
from .mesh import TriMesh, read_labels_json

logger = logging.getLogger("coseg.evaluation")


def label_accuracy(predicted, truth: np.ndarray, masses: np.ndarray | None = None) -> float:
    """Mass-weighted share of correctly labeled vertices under the best label bijection.

    predicted is a per-vertex array or anything with a ``label_of`` array.
    Labels left unmatched when the label counts differ score zero.
    """
    predicted = _as_labels(predicted)
    truth = np.asarray(truth, dtype=np.int64)
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predicted labels vs {len(truth)} ground-truth labels")
    if masses is None:
        masses = np.ones(len(truth))
    masses = np.asarray(masses, dtype=np.float64)
    if len(masses) != len(truth):
        raise LengthMismatch(f"{len(masses)} masses for {len(truth)} labels")
    if len(truth) == 0:
        return 1.0

    confusion = confusion_mass(predicted, truth, masses)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    # matched mass can exceed the total by rounding
    return min(1.0, float(confusion[rows, cols].sum() / masses.sum()))


def set_label_accuracy(
    predicted: list,
    truths: list[np.ndarray],
    masses: list[np.ndarray] | None = None,
) -> float:
    """Accuracy of a whole labeled set under one shared label matching."""
    if len(predicted) != len(truths):
        raise LengthMismatch(f"{len(predicted)} labelings vs {len(truths)} ground truths")
    if masses is None:
        masses = [np.ones(len(t)) for t in truths]
    return label_accuracy(
        np.concatenate([_as_labels(p) for p in predicted]),
        np.concatenate([np.asarray(t, dtype=np.int64) for t in truths]),
        np.concatenate([np.asarray(m, dtype=np.float64) for m in masses]),
    )


def rand_index(predicted, truth: np.ndarray) -> float:
    """Fraction of vertex pairs on which both labelings agree (same part or not)."""
    predicted = _as_labels(predicted)
    truth = np.asarray(truth, dtype=np.int64)
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predicted labels vs {len(truth)} ground-truth labels")
    return float(rand_score(truth, predicted))


def confusion_mass(predicted: np.ndarray, truth: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Matrix [p, t] of total mass predicted as p with true label t (over compacted ids)."""
    _, p = np.unique(predicted, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    shape = (p.max() + 1, t.max() + 1)
    return sparse.coo_matrix((masses, (p, t)), shape=shape).toarray()


def load_ground_truth(path: Path, mesh: TriMesh) -> np.ndarray:
    """Per-vertex labels from a vertex- or face-labeled file.

    Face labels become vertex labels by majority over incident faces, ties to
    the smallest label. JSON files are read as per-vertex label arrays.

    Raises CountMismatch if the label count matches neither vertices nor faces.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        labels = read_labels_json(path)
    else:
        try:
            labels = np.array(path.read_text().split(), dtype=np.int64)
        except ValueError as e:
            raise ParseError(f"{path}: ground truth must hold one integer per line: {e}") from e

    if len(labels) == mesh.n_vertices:
        return labels
    if len(labels) == mesh.n_faces:
        return face_to_vertex_labels(mesh, labels)
    raise CountMismatch(
        f"{path}: {len(labels)} labels, mesh {mesh.name} has {mesh.n_vertices} vertices and {mesh.n_faces} faces"
    )


def face_to_vertex_labels(mesh: TriMesh, face_labels: np.ndarray) -> np.ndarray:
    """Majority vote of incident face labels per vertex; ties go to the smallest label."""
    values, inverse = np.unique(face_labels, return_inverse=True)
    rows = mesh.faces.ravel()
    cols = np.repeat(inverse, 3)
    votes = sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(mesh.n_vertices, len(values))
    ).toarray()
    return values[np.argmax(votes, axis=1)]


def write_scores_json(path: Path, scores: dict[str, object]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(scores, indent=2, sort_keys=True) + "\n")


def _as_labels(labels) -> np.ndarray:
    return np.asarray(getattr(labels, "label_of", labels), dtype=np.int64)
