"""Mesh file formats and their capabilities.

This module is the single source of truth for:
- Which formats exist and which file suffixes select them
- Which formats can be read and which can be written
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import ParseError


class MeshFormat(Enum):
    """All supported mesh file formats."""

    OFF = "off"
    OBJ = "obj"
    PLY = "ply"


@dataclass(frozen=True)
class FormatSpec:
    """Capabilities of a single format."""

    format: MeshFormat
    suffixes: frozenset[str]
    readable: bool
    writable: bool

    def matches(self, path: Path) -> bool:
        """Check if the path suffix selects this format."""
        return path.suffix.lower() in self.suffixes


# Format registry - single source of truth
FORMAT_SPECS: dict[MeshFormat, FormatSpec] = {
    MeshFormat.OFF: FormatSpec(
        format=MeshFormat.OFF,
        suffixes=frozenset({".off"}),
        readable=True,
        writable=True,
    ),
    MeshFormat.OBJ: FormatSpec(
        format=MeshFormat.OBJ,
        suffixes=frozenset({".obj"}),
        readable=True,
        writable=False,
    ),
    MeshFormat.PLY: FormatSpec(
        format=MeshFormat.PLY,
        suffixes=frozenset({".ply"}),
        readable=True,  # ASCII only
        writable=True,
    ),
}


def get_format_spec(format_str: str | None) -> FormatSpec | None:
    """Get format spec by name string. Returns None for unknown names."""
    if format_str is None:
        return None
    try:
        return FORMAT_SPECS.get(MeshFormat(format_str.lower()))
    except ValueError:
        return None


def detect_format(
    path: Path,
    declared: str | MeshFormat | None = None,
    for_writing: bool = False,
) -> MeshFormat:
    """Resolve the format of a mesh file, from the declared name or the suffix.

    Raises ParseError if the format is unknown, or cannot be read (or written,
    with for_writing).
    """
    if isinstance(declared, MeshFormat):
        spec = FORMAT_SPECS[declared]
    elif declared is not None:
        spec = get_format_spec(declared)
        if spec is None:
            valid = [f.value for f in MeshFormat]
            raise ParseError(f"Unknown mesh format '{declared}'. Valid formats: {valid}")
    else:
        spec = next((s for s in FORMAT_SPECS.values() if s.matches(path)), None)
        if spec is None:
            raise ParseError(f"Cannot infer mesh format from suffix: {path}")

    if for_writing and not spec.writable:
        raise ParseError(f"Format '{spec.format.value}' is not writable")
    if not for_writing and not spec.readable:
        raise ParseError(f"Format '{spec.format.value}' is not readable")
    return spec.format
