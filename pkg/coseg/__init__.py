"""coseg - unsupervised co-segmentation of triangle-mesh sets via functional maps."""

__version__ = "0.1.0"

from .config import RunConfig, parse_config
from .descriptors import HksConfig, HksField, compute_hks, dump_hks, hks_times
from .errors import (
    BasisMismatch,
    ConfigMismatch,
    ConvergenceFailure,
    CosegError,
    CountMismatch,
    DegenerateGeometry,
    DisconnectedMesh,
    EmptyKernelRow,
    EmptyPart,
    EmptySet,
    IndexOutOfRange,
    IsolatedVertex,
    KTooLarge,
    LengthMismatch,
    MissingMap,
    MissingPaletteEntry,
    ParseError,
    SingularSystem,
    TooFewParts,
    TooFewPoints,
    ValidationError,
)
from .evaluation import label_accuracy, load_ground_truth, rand_index, set_label_accuracy
from .fmap import (
    ConstraintSet,
    FunctionalMap,
    build_hks_constraints,
    diagonal_concentration,
    estimate_map,
    push_function,
    sparsity_fraction,
)
from .formats import FORMAT_SPECS, FormatSpec, MeshFormat, detect_format
from .laplace import LaplaceSystem, apply_laplace_direct, build_laplace, dump_matrix_market
from .logging import add_run_handler, setup_logging
from .manifest import RunManifest, read_manifest, write_manifest
from .mesh import (
    TriMesh,
    VertexMassVector,
    default_palette,
    export_labeled_mesh,
    load_mesh,
    save_mesh,
    read_labels_json,
    read_ply,
    vertex_lumped_mass,
    write_labels_json,
)
from .pipeline import (
    CosegResult,
    Labeling,
    PartSignature,
    build_signatures,
    choose_reference,
    cluster_parts,
    part_indicator,
    run_coseg,
)
from .preseg import (
    Embedding,
    Segmentation,
    kmeans,
    pre_segment,
    spectral_embedding,
    split_disconnected_parts,
)
from .spectral import (
    BasisCache,
    FunctionCoefficients,
    SpectralBasis,
    compute_basis,
    project,
    reconstruct,
)
from .synthetic import dumbbell, icosphere, tetrahedron, write_demo_set

__all__ = [
    "__version__",
    # Config
    "RunConfig",
    "parse_config",
    # Descriptors
    "HksConfig",
    "HksField",
    "compute_hks",
    "dump_hks",
    "hks_times",
    # Errors
    "BasisMismatch",
    "ConfigMismatch",
    "ConvergenceFailure",
    "CosegError",
    "CountMismatch",
    "DegenerateGeometry",
    "DisconnectedMesh",
    "EmptyKernelRow",
    "EmptyPart",
    "EmptySet",
    "IndexOutOfRange",
    "IsolatedVertex",
    "KTooLarge",
    "LengthMismatch",
    "MissingMap",
    "MissingPaletteEntry",
    "ParseError",
    "SingularSystem",
    "TooFewParts",
    "TooFewPoints",
    "ValidationError",
    # Evaluation
    "label_accuracy",
    "load_ground_truth",
    "rand_index",
    "set_label_accuracy",
    # Functional maps
    "ConstraintSet",
    "FunctionalMap",
    "build_hks_constraints",
    "diagonal_concentration",
    "estimate_map",
    "push_function",
    "sparsity_fraction",
    # Formats
    "FORMAT_SPECS",
    "FormatSpec",
    "MeshFormat",
    "detect_format",
    # Laplace
    "LaplaceSystem",
    "apply_laplace_direct",
    "build_laplace",
    "dump_matrix_market",
    # Logging
    "add_run_handler",
    "setup_logging",
    # Manifest
    "RunManifest",
    "read_manifest",
    "write_manifest",
    # Mesh
    "TriMesh",
    "VertexMassVector",
    "default_palette",
    "export_labeled_mesh",
    "load_mesh",
    "save_mesh",
    "read_labels_json",
    "read_ply",
    "vertex_lumped_mass",
    "write_labels_json",
    # Pipeline
    "CosegResult",
    "Labeling",
    "PartSignature",
    "build_signatures",
    "choose_reference",
    "cluster_parts",
    "part_indicator",
    "run_coseg",
    # Pre-segmentation
    "Embedding",
    "Segmentation",
    "kmeans",
    "pre_segment",
    "spectral_embedding",
    "split_disconnected_parts",
    # Spectral
    "BasisCache",
    "FunctionCoefficients",
    "SpectralBasis",
    "compute_basis",
    "project",
    "reconstruct",
    # Synthetic shapes
    "dumbbell",
    "icosphere",
    "tetrahedron",
    "write_demo_set",
]
