"""Procedural meshes with known geometry, used for demos and as test oracles."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .mesh import TriMesh, save_mesh

logger = logging.getLogger("coseg.synthetic")


def tetrahedron(edge: float = 1.0, name: str = "tetrahedron") -> TriMesh:
    """Regular tetrahedron with the given edge length, outward oriented."""
    corners = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    )
    # corner-to-corner distance of this template is 2*sqrt(2)
    vertices = corners * (edge / (2.0 * np.sqrt(2.0)))
    faces = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(vertices, faces, name)


def icosphere(level: int = 3, radius: float = 1.0, name: str = "icosphere") -> TriMesh:
    """Subdivided icosahedron projected onto a sphere; level 3 has 642 vertices."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    points = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in vertices]

    for _ in range(level):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in midpoint_cache:
                m = points[a] + points[b]
                points.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(points) - 1
            return midpoint_cache[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = refined

    return TriMesh(np.asarray(points) * radius, np.asarray(faces), name)


def grid(nx: int, ny: int, spacing: float = 1.0, name: str = "grid") -> TriMesh:
    """Planar nx-by-ny vertex grid split into right triangles."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="ij")
    vertices = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    index = np.arange(nx * ny).reshape(nx, ny)
    a = index[:-1, :-1].ravel()
    b = index[1:, :-1].ravel()
    c = index[1:, 1:].ravel()
    d = index[:-1, 1:].ravel()
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(vertices, faces, name)


@dataclass(frozen=True)
class DumbbellSpec:
    """Two spherical lobes joined by a cylindrical neck along +z."""

    first_radius: float = 1.0
    second_radius: float = 0.7
    neck_radius: float = 0.25
    neck_length: float = 1.0
    spacing: float = 0.15
    segments: int = 24


def dumbbell(spec: DumbbellSpec = DumbbellSpec(), name: str = "dumbbell") -> tuple[TriMesh, np.ndarray]:
    """Surface of revolution with two lobes; returns the mesh and per-vertex lobe ids.

    Lobe 0 is the first (lower) sphere; the split between lobes is the middle
    of the neck.
    """
    r1, r2, rn = spec.first_radius, spec.second_radius, spec.neck_radius
    if not (0 < rn < min(r1, r2)):
        raise ValueError(f"neck radius {rn} must be positive and below both lobe radii")

    first_join = np.sqrt(r1 * r1 - rn * rn)
    neck_top = first_join + spec.neck_length
    second_center = neck_top + np.sqrt(r2 * r2 - rn * rn)
    split_z = first_join + spec.neck_length / 2.0

    theta = np.linspace(0.0, np.pi - np.arcsin(rn / r1), 400)
    phi = np.linspace(np.arcsin(rn / r2), np.pi, 400)
    # the straight segment between the two arcs is the neck
    profile_r = np.concatenate([r1 * np.sin(theta), r2 * np.sin(phi)])
    profile_z = np.concatenate([-r1 * np.cos(theta), second_center - r2 * np.cos(phi)])
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(profile_r), np.diff(profile_z)))])

    n_intervals = max(4, int(round(arc[-1] / spec.spacing)))
    s = np.linspace(0.0, arc[-1], n_intervals + 1)[1:-1]
    ring_r = np.interp(s, arc, profile_r)
    ring_z = np.interp(s, arc, profile_z)

    angles = 2.0 * np.pi * np.arange(spec.segments) / spec.segments
    rings = [
        np.column_stack([r * np.cos(angles), r * np.sin(angles), np.full(spec.segments, z)])
        for r, z in zip(ring_r, ring_z)
    ]
    bottom = np.array([[0.0, 0.0, profile_z[0]]])
    top = np.array([[0.0, 0.0, profile_z[-1]]])
    vertices = np.vstack([bottom, *rings, top])

    n_rings = len(rings)
    m = spec.segments
    j = np.arange(m)
    jn = (j + 1) % m

    def ring(i: int) -> int:
        return 1 + i * m

    faces = [np.column_stack([np.zeros(m, dtype=int), ring(0) + jn, ring(0) + j])]
    for i in range(n_rings - 1):
        lo, hi = ring(i), ring(i + 1)
        faces.append(np.column_stack([lo + j, lo + jn, hi + jn]))
        faces.append(np.column_stack([lo + j, hi + jn, hi + j]))
    apex = len(vertices) - 1
    faces.append(np.column_stack([np.full(m, apex), ring(n_rings - 1) + j, ring(n_rings - 1) + jn]))

    mesh = TriMesh(vertices, np.vstack(faces), name)
    lobes = (mesh.vertices[:, 2] >= split_z).astype(np.int64)
    return mesh, lobes


def jitter(mesh: TriMesh, amount: float, seed: int = 0, name: str | None = None) -> TriMesh:
    """Displace vertices by Gaussian noise with std amount * mean edge length."""
    rng = np.random.default_rng(seed)
    scale = amount * mesh.mean_edge_length()
    noise = rng.normal(0.0, scale, size=mesh.vertices.shape)
    return mesh.with_vertices(mesh.vertices + noise, name or f"{mesh.name}-jitter")


def random_rotation(seed: int = 0) -> np.ndarray:
    return Rotation.random(random_state=seed).as_matrix()


def rigid_motion(
    mesh: TriMesh,
    rotation: np.ndarray | None = None,
    translation: np.ndarray | None = None,
    name: str | None = None,
) -> TriMesh:
    """Rotate about the origin, then translate."""
    rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    translation = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
    return mesh.with_vertices(mesh.vertices @ rotation.T + translation, name or mesh.name)


def scaled(mesh: TriMesh, factor: float) -> TriMesh:
    return mesh.with_vertices(mesh.vertices * factor)


def disjoint_union(first: TriMesh, second: TriMesh, name: str = "union") -> TriMesh:
    """Both meshes in one vertex/face list, without connecting them."""
    vertices = np.vstack([first.vertices, second.vertices])
    faces = np.vstack([first.faces, second.faces + first.n_vertices])
    return TriMesh(vertices, faces, name)


# Lobe proportions vary across the set; lobe 0 is always the larger one.
DEMO_SPECS: tuple[DumbbellSpec, ...] = (
    DumbbellSpec(first_radius=1.0, second_radius=0.6, neck_length=1.0),
    DumbbellSpec(first_radius=1.0, second_radius=0.7, neck_length=0.9),
    DumbbellSpec(first_radius=0.9, second_radius=0.55, neck_length=1.1),
    DumbbellSpec(first_radius=1.1, second_radius=0.75, neck_length=1.0),
)


def write_demo_set(output_dir: Path, specs: tuple[DumbbellSpec, ...] = DEMO_SPECS) -> Path:
    """Write dumbbell OFF files, per-vertex ground truth and a run config.

    Returns the path of the written demo.json.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    shapes: list[str] = []
    truths: list[str] = []
    for index, spec in enumerate(specs):
        name = f"dumbbell-{index}"
        mesh, lobes = dumbbell(spec, name)
        save_mesh(output_dir / f"{name}.off", mesh)
        (output_dir / f"{name}.seg").write_text("\n".join(str(int(x)) for x in lobes) + "\n")
        shapes.append(f"{name}.off")
        truths.append(f"{name}.seg")
        logger.info(f"Wrote {name}: {mesh.n_vertices} vertices")

    config = {
        "shapes": shapes,
        "truth": truths,
        "n_parts": 2,
        "L": 2,
        "seed": 0,
        "output_dir": "out",
    }
    config_path = output_dir / "demo.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")
    return config_path
