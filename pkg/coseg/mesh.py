"""Triangle meshes: loading, validation, geometry and labeled export."""

import colorsys
import hashlib
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _connected_components

from .errors import (
    DegenerateGeometry,
    IndexOutOfRange,
    IsolatedVertex,
    LengthMismatch,
    MissingPaletteEntry,
    ParseError,
)
from .formats import MeshFormat, detect_format

logger = logging.getLogger("coseg.mesh")

MIN_FACE_AREA = 1e-12
MIN_VERTICES = 4

RGB = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle mesh. Arrays are copied and frozen on construction.

    Construction validates indices, distinct corners and face areas; the
    vertex/face count minimums are enforced by load_mesh only.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = "mesh"

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64, copy=True)
        faces = np.array(self.faces, dtype=np.int64, copy=True)

        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ParseError(f"{self.name}: vertices must be (n, 3), got {vertices.shape}")
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ParseError(f"{self.name}: faces must be (m, 3), got {faces.shape}")
        if not np.all(np.isfinite(vertices)):
            raise ParseError(f"{self.name}: non-finite vertex coordinates")

        bad = np.flatnonzero(np.any((faces < 0) | (faces >= len(vertices)), axis=1))
        if bad.size:
            raise IndexOutOfRange(
                f"{self.name}: face {bad[0]} references a vertex outside "
                f"[0, {len(vertices)}): {faces[bad[0]].tolist()}"
            )

        repeated = np.flatnonzero(
            (faces[:, 0] == faces[:, 1])
            | (faces[:, 1] == faces[:, 2])
            | (faces[:, 0] == faces[:, 2])
        )
        if repeated.size:
            raise DegenerateGeometry(
                f"{self.name}: face {repeated[0]} repeats a vertex: {faces[repeated[0]].tolist()}"
            )

        vertices.flags.writeable = False
        faces.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

        small = np.flatnonzero(self.face_areas < MIN_FACE_AREA)
        if small.size:
            raise DegenerateGeometry(
                f"{self.name}: face {small[0]} has area {self.face_areas[small[0]]:.3e} "
                f"< {MIN_FACE_AREA:g} ({small.size} degenerate faces)"
            )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def face_areas(self) -> np.ndarray:
        """Area of every face, half the norm of the edge cross product."""
        v0 = self.vertices[self.faces[:, 0]]
        v1 = self.vertices[self.faces[:, 1]]
        v2 = self.vertices[self.faces[:, 2]]
        cross = np.cross(v1 - v0, v2 - v0)
        areas = 0.5 * np.sqrt(np.sum(cross * cross, axis=1))
        areas.flags.writeable = False
        return areas

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) pairs, i < j."""
        e = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        e.sort(axis=1)
        unique = np.unique(e, axis=0)
        unique.flags.writeable = False
        return unique

    def mean_edge_length(self) -> float:
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 vertex adjacency matrix from face edges."""
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e))
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    def connected_components(self) -> tuple[int, np.ndarray]:
        """Number of components and per-vertex component id."""
        n_components, labels = _connected_components(self.adjacency(), directed=False)
        return int(n_components), labels

    def isolated_vertices(self) -> np.ndarray:
        counts = np.bincount(self.faces.ravel(), minlength=self.n_vertices)
        return np.flatnonzero(counts == 0)

    def content_hash(self) -> str:
        """SHA-256 over vertex coordinates and face indices."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.faces, dtype="<i8").tobytes())
        return digest.hexdigest()

    def with_vertices(self, vertices: np.ndarray, name: str | None = None) -> "TriMesh":
        """Same connectivity, new positions."""
        return TriMesh(vertices, self.faces, name or self.name)


@dataclass(frozen=True, eq=False)
class VertexMassVector:
    """Barycentric lumped vertex masses (one third of each incident face area)."""

    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def __len__(self) -> int:
        return len(self.masses)


# =============================================================================
# Public API
# =============================================================================


def load_mesh(
    path: Path,
    format: str | MeshFormat | None = None,
    prune_isolated: bool = True,
) -> TriMesh:
    """Load an OFF, OBJ or ASCII PLY file into a validated TriMesh.

    Polygons with more than three corners are fan-triangulated. Isolated
    vertices are pruned with a warning unless prune_isolated is False.
    """
    path = Path(path)
    mesh_format = detect_format(path, format)
    text = path.read_text()

    if mesh_format is MeshFormat.OFF:
        vertices, polygons = _parse_off(text, path)
    elif mesh_format is MeshFormat.OBJ:
        vertices, polygons = _parse_obj(text, path)
    else:
        vertices, polygons, _ = _parse_ply(text, path)

    n = len(vertices)
    for index, polygon in enumerate(polygons):
        if any(i < 0 or i >= n for i in polygon):
            raise IndexOutOfRange(
                f"{path}: polygon {index} references a vertex outside [0, {n}): {polygon}"
            )

    faces = _fan_triangulate(polygons, path)
    mesh = TriMesh(np.asarray(vertices, dtype=np.float64).reshape(-1, 3), faces, path.stem)

    if prune_isolated and mesh.isolated_vertices().size:
        mesh, _ = prune_isolated_vertices(mesh)

    if mesh.n_vertices < MIN_VERTICES or mesh.n_faces < 1:
        raise ParseError(
            f"{path}: need at least {MIN_VERTICES} vertices and 1 face, "
            f"got {mesh.n_vertices} vertices and {mesh.n_faces} faces"
        )

    logger.debug(f"Loaded {path.name}: {mesh.n_vertices} vertices, {mesh.n_faces} faces")
    return mesh


def prune_isolated_vertices(mesh: TriMesh) -> tuple[TriMesh, np.ndarray]:
    """Drop vertices without incident faces, keeping the order of the rest.

    Returns the pruned mesh and the original indices of the kept vertices.
    """
    isolated = mesh.isolated_vertices()
    if isolated.size == 0:
        return mesh, np.arange(mesh.n_vertices)

    logger.warning(f"{mesh.name}: pruning {isolated.size} isolated vertices")
    keep = np.setdiff1d(np.arange(mesh.n_vertices), isolated)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    return TriMesh(mesh.vertices[keep], remap[mesh.faces], mesh.name), keep


def vertex_lumped_mass(mesh: TriMesh) -> VertexMassVector:
    """Lumped mass per vertex: sum of Area(X)/3 over incident faces.

    Raises IsolatedVertex if some vertex has no incident face.
    """
    isolated = mesh.isolated_vertices()
    if isolated.size:
        raise IsolatedVertex(
            f"{mesh.name}: {isolated.size} isolated vertices (first: {isolated[0]}); "
            f"prune them before building mass matrices",
            isolated.tolist(),
        )
    per_corner = np.repeat(mesh.face_areas / 3.0, 3)
    masses = np.bincount(mesh.faces.ravel(), weights=per_corner, minlength=mesh.n_vertices)
    masses.flags.writeable = False
    return VertexMassVector(masses)


def export_labeled_mesh(
    mesh: TriMesh,
    labels: np.ndarray | list[int],
    palette: dict[int, RGB],
    path: Path,
) -> None:
    """Write an ASCII PLY with per-vertex RGB colors taken from the palette."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != mesh.n_vertices:
        raise LengthMismatch(
            f"{mesh.name}: {len(labels)} labels for {mesh.n_vertices} vertices"
        )
    missing = sorted(set(np.unique(labels).tolist()) - set(palette))
    if missing:
        raise MissingPaletteEntry(f"No palette color for labels {missing}")

    colors = np.array([palette[int(label)] for label in labels], dtype=np.int64).reshape(-1, 3)
    write_ply(path, mesh.vertices, mesh.faces, colors)


def save_mesh(path: Path, mesh: TriMesh, format: str | MeshFormat | None = None) -> None:
    """Write a mesh in the format named by format or the path suffix.

    Raises ParseError for unknown or read-only formats.
    """
    path = Path(path)
    mesh_format = detect_format(path, format, for_writing=True)
    if mesh_format is MeshFormat.OFF:
        write_off(path, mesh)
    else:
        write_ply(path, mesh.vertices, mesh.faces)


def write_off(path: Path, mesh: TriMesh) -> None:
    """Write an ASCII OFF file with full double precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} {len(mesh.edges)}"]
    lines += [f"{float(x):.17g} {float(y):.17g} {float(z):.17g}" for x, y, z in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist()]
    path.write_text("\n".join(lines) + "\n")


def write_ply(
    path: Path,
    vertices: np.ndarray,
    faces: np.ndarray,
    colors: np.ndarray | None = None,
) -> None:
    """Write an ASCII PLY file; colors are per-vertex uchar RGB."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    header = [
        "ply",
        "format ascii 1.0",
        "comment coseg",
        f"element vertex {len(vertices)}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += [
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]

    lines = list(header)
    for i, v in enumerate(vertices):
        row = f"{float(v[0]):.17g} {float(v[1]):.17g} {float(v[2]):.17g}"
        if colors is not None:
            r, g, b = (int(c) for c in colors[i])
            row += f" {r} {g} {b}"
        lines.append(row)
    for face in faces:
        lines.append(f"{len(face)} " + " ".join(str(int(i)) for i in face))

    path.write_text("\n".join(lines) + "\n")


def read_ply(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read an ASCII PLY file into (vertices, triangles, colors or None)."""
    path = Path(path)
    vertices, polygons, colors = _parse_ply(path.read_text(), path)
    faces = _fan_triangulate(polygons, path)
    return np.asarray(vertices, dtype=np.float64).reshape(-1, 3), faces, colors


def default_palette(n_labels: int) -> dict[int, RGB]:
    """Deterministic, visually distinct colors for labels 0..n_labels-1."""
    base: list[RGB] = [
        (230, 25, 75), (60, 180, 75), (0, 130, 200), (255, 225, 25),
        (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
        (210, 245, 60), (250, 190, 190), (0, 128, 128), (170, 110, 40),
    ]
    palette: dict[int, RGB] = {}
    for label in range(n_labels):
        if label < len(base):
            palette[label] = base[label]
        else:
            hue = (label * 0.618033988749895) % 1.0
            r, g, b = colorsys.hsv_to_rgb(hue, 0.75, 0.9)
            palette[label] = (int(r * 255), int(g * 255), int(b * 255))
    return palette


def write_labels_json(path: Path, labels: np.ndarray | list[int]) -> None:
    """Write the per-vertex label sidecar: a JSON array of integers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([int(x) for x in labels]) + "\n")


def read_labels_json(path: Path) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid label JSON in {path}: {e}") from e
    if isinstance(data, dict) and "label_of" in data:
        data = data["label_of"]
    if not isinstance(data, list) or not all(isinstance(x, int) for x in data):
        raise ParseError(f"{path}: expected a JSON array of integers")
    return np.asarray(data, dtype=np.int64)


# =============================================================================
# Private helpers
# =============================================================================


def _content_lines(text: str) -> list[tuple[int, list[str]]]:
    """Non-empty lines with comments stripped, as (line number, tokens)."""
    result: list[tuple[int, list[str]]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            result.append((number, line.split()))
    return result


def _parse_off(text: str, path: Path) -> tuple[list[list[float]], list[list[int]]]:
    lines = _content_lines(text)
    if not lines or not lines[0][1][0].upper().endswith("OFF"):
        raise ParseError(f"{path}: missing OFF header")

    header = lines[0][1]
    cursor = 1
    try:
        if len(header) >= 3:
            counts = header[1:]
        else:
            counts = lines[1][1]
            cursor = 2
        n_vertices, n_faces = int(counts[0]), int(counts[1])
    except (IndexError, ValueError) as e:
        raise ParseError(f"{path}: malformed OFF counts line") from e

    if len(lines) < cursor + n_vertices + n_faces:
        raise ParseError(
            f"{path}: expected {n_vertices} vertices and {n_faces} faces, "
            f"file has {len(lines) - cursor} records"
        )

    vertices: list[list[float]] = []
    polygons: list[list[int]] = []
    for number, tokens in lines[cursor : cursor + n_vertices]:
        try:
            vertices.append([float(t) for t in tokens[:3]])
        except ValueError as e:
            raise ParseError(f"{path}:{number}: bad vertex record") from e
        if len(vertices[-1]) != 3:
            raise ParseError(f"{path}:{number}: vertex needs 3 coordinates")

    for number, tokens in lines[cursor + n_vertices : cursor + n_vertices + n_faces]:
        try:
            size = int(tokens[0])
            polygon = [int(t) for t in tokens[1 : 1 + size]]
        except (IndexError, ValueError) as e:
            raise ParseError(f"{path}:{number}: bad face record") from e
        if len(polygon) != size:
            raise ParseError(f"{path}:{number}: face declares {size} corners, has {len(polygon)}")
        polygons.append(polygon)

    return vertices, polygons


def _parse_obj(text: str, path: Path) -> tuple[list[list[float]], list[list[int]]]:
    vertices: list[list[float]] = []
    polygons: list[list[int]] = []
    for number, tokens in _content_lines(text):
        record = tokens[0]
        try:
            if record == "v":
                coords = [float(t) for t in tokens[1:4]]
                if len(coords) != 3:
                    raise ValueError("vertex needs 3 coordinates")
                vertices.append(coords)
            elif record == "f":
                polygon: list[int] = []
                for token in tokens[1:]:
                    index = int(token.split("/", 1)[0])
                    if index == 0:
                        raise ValueError("OBJ indices are 1-based")
                    # negative indices are relative to the vertices read so far
                    polygon.append(index - 1 if index > 0 else len(vertices) + index)
                polygons.append(polygon)
        except ValueError as e:
            raise ParseError(f"{path}:{number}: bad '{record}' record: {e}") from e
    return vertices, polygons


def _parse_ply(
    text: str, path: Path
) -> tuple[list[list[float]], list[list[int]], np.ndarray | None]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing PLY magic")

    elements: list[tuple[str, int, list[tuple[str, bool]]]] = []
    body_start = None
    for number, raw in enumerate(lines[1:], start=1):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError(f"{path}: only ASCII PLY is supported")
        elif tokens[0] == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise ParseError(f"{path}:{number + 1}: malformed element line '{raw.strip()}'")
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"{path}:{number + 1}: property before element")
            if len(tokens) < 3:
                raise ParseError(f"{path}:{number + 1}: malformed property line '{raw.strip()}'")
            is_list = tokens[1] == "list"
            elements[-1][2].append((tokens[-1], is_list))
        elif tokens[0] == "end_header":
            body_start = number + 1
            break
    if body_start is None:
        raise ParseError(f"{path}: missing end_header")

    rows = [line.split() for line in lines[body_start:] if line.strip()]
    vertices: list[list[float]] = []
    polygons: list[list[int]] = []
    colors: list[list[int]] = []
    cursor = 0
    try:
        for name, count, properties in elements:
            for _ in range(count):
                tokens = rows[cursor]
                cursor += 1
                values: dict[str, list[str]] = {}
                position = 0
                for prop, is_list in properties:
                    if is_list:
                        size = int(tokens[position])
                        values[prop] = tokens[position + 1 : position + 1 + size]
                        position += 1 + size
                    else:
                        values[prop] = [tokens[position]]
                        position += 1
                if name == "vertex":
                    vertices.append([float(values[axis][0]) for axis in ("x", "y", "z")])
                    if all(c in values for c in ("red", "green", "blue")):
                        colors.append([int(values[c][0]) for c in ("red", "green", "blue")])
                elif name == "face":
                    key = "vertex_indices" if "vertex_indices" in values else "vertex_index"
                    polygons.append([int(i) for i in values[key]])
    except (IndexError, KeyError, ValueError) as e:
        raise ParseError(f"{path}: malformed PLY body: {e}") from e

    color_array = np.asarray(colors, dtype=np.int64) if colors else None
    return vertices, polygons, color_array


def _fan_triangulate(polygons: list[list[int]], path: Path) -> np.ndarray:
    triangles: list[list[int]] = []
    for index, polygon in enumerate(polygons):
        if len(polygon) < 3:
            raise ParseError(f"{path}: polygon {index} has fewer than 3 corners")
        anchor = polygon[0]
        for k in range(1, len(polygon) - 1):
            triangles.append([anchor, polygon[k], polygon[k + 1]])
    return np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
