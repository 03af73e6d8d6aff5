"""Exception hierarchy for the co-segmentation pipeline.

Every failure the library raises on purpose is a CosegError. The CLI maps
``exit_code`` onto the process exit status: 2 for validation problems,
3 for runtime failures.
"""


class CosegError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 3


class ValidationError(CosegError, ValueError):
    """Raised when a config or argument fails validation.

    Carries the individual field-level problems in ``errors``.
    """

    exit_code = 2

    def __init__(self, message: str, errors: list[str] | None = None) -> None:
        self.errors = list(errors) if errors else [message]
        super().__init__(message)

    @classmethod
    def from_errors(cls, errors: list[str]) -> "ValidationError":
        return cls("; ".join(errors), errors)


# Mesh loading and export


class ParseError(CosegError):
    """Raised when a mesh or label file is malformed."""

    pass


class DegenerateGeometry(CosegError):
    """Raised for zero-area faces or faces with repeated vertex indices."""

    pass


class IndexOutOfRange(CosegError):
    """Raised when a face references a vertex index outside the vertex list."""

    pass


class IsolatedVertex(CosegError):
    """Raised when a vertex has no incident face (its lumped mass would be zero)."""

    def __init__(self, message: str, vertices: list[int]) -> None:
        self.vertices = vertices
        super().__init__(message)


class MissingPaletteEntry(CosegError):
    """Raised when a label has no color in the export palette."""

    pass


# Operators and bases


class EmptyKernelRow(CosegError):
    """Raised when the truncated heat kernel leaves a vertex without neighbours."""

    pass


class ConvergenceFailure(CosegError):
    """Raised when the eigensolver does not reach the residual tolerance."""

    def __init__(self, message: str, residuals: list[float] | None = None) -> None:
        self.residuals = residuals or []
        super().__init__(message)


class KTooLarge(CosegError):
    """Raised when more eigenpairs are requested than the mesh supports."""

    pass


class LengthMismatch(CosegError):
    """Raised when a per-vertex array does not match the vertex count."""

    pass


class BasisMismatch(CosegError):
    """Raised when coefficients are used with a basis they were not expressed in."""

    pass


class DisconnectedMesh(CosegError):
    """Raised when an operation needs lambda_2 > 0 but the mesh has several components."""

    pass


# Clustering, maps and the pipeline


class TooFewPoints(CosegError):
    """Raised when k-means is asked for more clusters than distinct points."""

    pass


class ConfigMismatch(CosegError):
    """Raised when two descriptor fields were sampled with different settings."""

    pass


class SingularSystem(CosegError):
    """Raised when the unregularized map system is rank deficient."""

    def __init__(self, message: str, rank: int) -> None:
        self.rank = rank
        super().__init__(message)


class EmptySet(CosegError):
    """Raised when an operation needs at least one shape and got none."""

    pass


class EmptyPart(CosegError):
    """Raised when a part id selects no vertices."""

    pass


class MissingMap(CosegError):
    """Raised when a non-reference shape has no functional map to the reference."""

    pass


class TooFewParts(CosegError):
    """Raised when more labels are requested than there are parts to cluster."""

    pass


class CountMismatch(CosegError):
    """Raised when a ground-truth file matches neither the vertex nor the face count."""

    pass
